// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "diffseg/gradcheck.hpp"
#include "diffseg/losses.hpp"
#include "diffseg/model.hpp"

using namespace diffseg;
namespace fs = std::filesystem;

namespace {

Model toy_model(int layers_enc = 2, int layers_dec = 2, int width_enc = 6, int width_dec = 4,
                int input_dim = 4, int classes = 3) {
  EncoderConfig enc;
  enc.layers = layers_enc;
  enc.width = width_enc;
  enc.input_dim = input_dim;
  enc.num_classes = classes;
  DecoderConfig dec;
  dec.layers = layers_dec;
  dec.width = width_dec;
  dec.step_embed_dim = 8;
  dec.num_classes = classes;
  dec.total_steps = 100;
  Model model(enc, dec);
  model.init_params(17);
  return model;
}

fs::path temp_file(const char* name) {
  return fs::temp_directory_path() / (std::string("diffseg_test_") + name);
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("zero input yields finite conditioning and normalized aux rows") {
  Model model = toy_model();
  const Model::EncodedValue out = model.encode_value(Matrix(10, 4));
  CHECK(out.cond.all_finite());
  CHECK(out.aux.rows == 10);
  for (int i = 0; i < out.aux.rows; ++i) {
    double sum = 0.0;
    for (int c = 0; c < out.aux.cols; ++c) sum += out.aux.at(i, c);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("both networks preserve the sequence length") {
  Model model = toy_model();
  Rng rng(41);
  for (int len : {1, 2, 17, 256}) {
    const Model::EncodedValue enc = model.encode_value(rng.normal_matrix(len, 4));
    CHECK(enc.cond.rows == len);
    CHECK(enc.aux.rows == len);
    const Matrix probs = model.decode_value(rng.normal_matrix(len, 3), 42, enc.cond);
    CHECK(probs.rows == len);
    CHECK(probs.cols == 3);
  }
}

TEST_CASE("decoder rows are probabilities") {
  Model model = toy_model();
  Rng rng(42);
  const Model::EncodedValue enc = model.encode_value(rng.normal_matrix(20, 4));
  const Matrix probs = model.decode_value(rng.normal_matrix(20, 3), 7, enc.cond);
  for (int i = 0; i < probs.rows; ++i) {
    double sum = 0.0;
    for (int c = 0; c < probs.cols; ++c) {
      CHECK(probs.at(i, c) >= 0.0);
      sum += probs.at(i, c);
    }
    CHECK(std::fabs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("step conditioning is live") {
  Model model = toy_model();
  Rng rng(43);
  const Model::EncodedValue enc = model.encode_value(rng.normal_matrix(12, 4));
  const Matrix state = rng.normal_matrix(12, 3);
  const Matrix a = model.decode_value(state, 1, enc.cond);
  const Matrix b = model.decode_value(state, 90, enc.cond);
  CHECK(max_abs_diff(a, b) > 0.0);
}

TEST_CASE("step embedding boundary values, range and distinctness") {
  const Matrix zero = step_embedding(0, 16, 1000);
  for (int i = 0; i < 8; ++i) {
    CHECK(zero.at(0, i) == 0.0);
    CHECK(zero.at(0, 8 + i) == 1.0);
  }
  for (int s : {1, 500, 1000}) {
    const Matrix emb = step_embedding(s, 64, 1000);
    for (double v : emb.data) {
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }
  }
  const Matrix e1 = step_embedding(1, 64, 1000);
  const Matrix e500 = step_embedding(500, 64, 1000);
  const Matrix e1000 = step_embedding(1000, 64, 1000);
  CHECK(max_abs_diff(e1, e500) > 1e-3);
  CHECK(max_abs_diff(e1, e1000) > 1e-3);
  CHECK(max_abs_diff(e500, e1000) > 1e-3);

  CHECK_THROWS_AS(step_embedding(5, 7, 1000), ConfigError);
  CHECK_THROWS_AS(step_embedding(-1, 16, 1000), ConfigError);
  CHECK_THROWS_AS(step_embedding(1001, 16, 1000), ConfigError);
}

TEST_CASE("encoder gradients of the auxiliary loss pass the finite-difference check") {
  Model model = toy_model(2, 2, 6, 4, 4, 3);
  Rng rng(44);
  const Matrix features = rng.normal_matrix(12, 4);
  const LabelSeq labels{0, 0, 1, 1, 1, 2, 2, 0, 0, 1, 2, 2};
  const Matrix y = one_hot(labels, 3);

  const auto build = [&](Tape& t, const ParamStore&) {
    const Model::Encoded enc = model.encode(t, t.input(features));
    return loss_ce_g(t, enc.aux, y, 1e-8);
  };
  const GradCheckReport report = check_gradient(build, model.params(), 1e-6, 1e-4);
  INFO(report.to_string());
  CHECK(report.pass);
}

TEST_CASE("decoder gradients of the combined loss pass the finite-difference check") {
  Model model = toy_model(2, 2, 6, 4, 4, 3);
  Rng rng(45);
  const Matrix features = rng.normal_matrix(12, 4);
  const LabelSeq labels{0, 0, 0, 1, 1, 1, 2, 2, 2, 0, 0, 0};
  const Matrix y = one_hot(labels, 3);
  const BoundarySoft soft = soften_boundaries(hard_boundaries(labels), 1.0);
  const Matrix state = rng.normal_matrix(12, 3);
  const LossWeights weights;

  const auto build = [&](Tape& t, const ParamStore&) {
    const Model::Encoded enc = model.encode(t, t.input(features));
    const Var probs = model.decode(t, t.input(state), 55, enc.cond);
    return loss_sum_g(t, probs, enc.aux, y, soft, weights);
  };
  const GradCheckReport report = check_gradient(build, model.params(), 1e-6, 1e-4);
  INFO(report.to_string());
  CHECK(report.pass);
}

TEST_CASE("perturbations outside the receptive field leave frames untouched") {
  const int layers = 3;  // dilations 1, 2, 4 -> radius 7
  Model model = toy_model(layers, 2, 6, 4, 4, 3);
  Rng rng(46);
  const int len = 40, hit = 20, radius = (1 << layers) - 1;
  const Matrix base = rng.normal_matrix(len, 4);
  Matrix bumped = base;
  for (int c = 0; c < 4; ++c) bumped.at(hit, c) += 2.5;

  const Matrix a = model.encode_value(base).cond;
  const Matrix b = model.encode_value(bumped).cond;
  bool some_change = false;
  for (int i = 0; i < len; ++i) {
    double diff = 0.0;
    for (int c = 0; c < a.cols; ++c) diff = std::max(diff, std::fabs(a.at(i, c) - b.at(i, c)));
    if (std::abs(i - hit) > radius) {
      CHECK(diff == 0.0);
    } else if (diff > 0.0) {
      some_change = true;
    }
  }
  CHECK(some_change);
}

TEST_CASE("encoder taps concatenate the selected layers") {
  EncoderConfig enc;
  enc.layers = 3;
  enc.width = 5;
  enc.input_dim = 4;
  enc.num_classes = 3;
  enc.tap_layers = {1, 3};
  DecoderConfig dec;
  dec.layers = 1;
  dec.width = 4;
  dec.step_embed_dim = 8;
  dec.num_classes = 3;
  dec.total_steps = 10;
  Model model(enc, dec);
  model.init_params(3);
  CHECK(model.encoder_config().cond_dim() == 10);
  Rng rng(47);
  CHECK(model.encode_value(rng.normal_matrix(6, 4)).cond.cols == 10);
}

TEST_CASE("initialization is deterministic in the seed") {
  Model a = toy_model();
  Model b = toy_model();
  for (int i = 0; i < a.params().count(); ++i)
    CHECK(max_abs_diff(a.params().value(i), b.params().value(i)) == 0.0);
  b.init_params(18);
  bool differs = false;
  for (int i = 0; i < a.params().count(); ++i)
    if (max_abs_diff(a.params().value(i), b.params().value(i)) > 0.0) differs = true;
  CHECK(differs);
}

TEST_CASE("checkpoint round trip is bit-exact and reproduces forward outputs") {
  Model model = toy_model();
  Rng rng(48);
  const Matrix features = rng.normal_matrix(15, 4);
  const Matrix state = rng.normal_matrix(15, 3);
  const Matrix before = model.decode_value(state, 9, model.encode_value(features).cond);

  const fs::path path = temp_file("ckpt.bin");
  save_checkpoint(path.string(), model);
  const Model loaded = load_checkpoint(path.string());
  fs::remove(path);

  REQUIRE(loaded.params().count() == model.params().count());
  for (int i = 0; i < model.params().count(); ++i) {
    CHECK(loaded.params().name(i) == model.params().name(i));
    const Matrix& x = model.params().value(i);
    const Matrix& y = loaded.params().value(i);
    REQUIRE(x.same_shape(y));
    for (int k = 0; k < x.size(); ++k) CHECK(x.data[k] == y.data[k]);
  }
  const Matrix after = loaded.decode_value(state, 9, loaded.encode_value(features).cond);
  CHECK(max_abs_diff(before, after) == 0.0);
}

TEST_CASE("checkpoints carry trainer state when asked") {
  Model model = toy_model();
  TrainerState state;
  state.iteration = 123;
  state.epoch = 7;
  state.adam_t = 123;
  for (int i = 0; i < model.params().count(); ++i) {
    state.adam_m.push_back(Matrix::filled(model.params().value(i).rows,
                                          model.params().value(i).cols, 0.25));
    state.adam_v.push_back(Matrix::filled(model.params().value(i).rows,
                                          model.params().value(i).cols, 0.5));
  }
  Rng rng(49);
  state.rng_state = rng.save_state();

  const fs::path path = temp_file("ckpt_trainer.bin");
  save_checkpoint(path.string(), model, &state);
  TrainerState loaded_state;
  const Model loaded = load_checkpoint(path.string(), &loaded_state);
  fs::remove(path);

  CHECK(loaded_state.iteration == 123);
  CHECK(loaded_state.epoch == 7);
  CHECK(loaded_state.adam_t == 123);
  CHECK(loaded_state.rng_state == state.rng_state);
  CHECK(max_abs_diff(loaded_state.adam_m[0], state.adam_m[0]) == 0.0);

  // A parameter-only checkpoint cannot seed a resume.
  const fs::path plain = temp_file("ckpt_plain.bin");
  save_checkpoint(plain.string(), model);
  TrainerState missing;
  CHECK_THROWS_AS(load_checkpoint(plain.string(), &missing), ValidationError);
  fs::remove(plain);
}

TEST_CASE("model rejects inconsistent shapes") {
  Model model = toy_model();
  Rng rng(50);
  Tape t;
  CHECK_THROWS_AS(model.encode(t, t.input(rng.normal_matrix(5, 3))), ShapeError);
  const Model::EncodedValue enc = model.encode_value(rng.normal_matrix(5, 4));
  CHECK_THROWS_AS(model.decode_value(rng.normal_matrix(5, 2), 1, enc.cond), ShapeError);
  CHECK_THROWS_AS(model.decode_value(rng.normal_matrix(4, 3), 1, enc.cond), ShapeError);
}

}  // TEST_SUITE
