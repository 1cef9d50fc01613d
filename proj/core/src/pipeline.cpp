// SPDX-License-Identifier: Apache-2.0
#include "diffseg/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "diffseg/errors.hpp"

namespace fs = std::filesystem;

namespace diffseg {

void AdamOptimizer::ensure_buffers(const ParamStore& params) {
  if (!m_.empty()) return;
  for (int i = 0; i < params.count(); ++i) {
    m_.emplace_back(params.value(i).rows, params.value(i).cols);
    v_.emplace_back(params.value(i).rows, params.value(i).cols);
  }
}

void AdamOptimizer::step(ParamStore& params) {
  ensure_buffers(params);
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (int b = 0; b < params.count(); ++b) {
    Matrix& p = params.value(b);
    const Matrix& g = params.grad(b);
    Matrix& m = m_[static_cast<std::size_t>(b)];
    Matrix& v = v_[static_cast<std::size_t>(b)];
    for (int i = 0; i < p.size(); ++i) {
      m.data[i] = beta1_ * m.data[i] + (1.0 - beta1_) * g.data[i];
      v.data[i] = beta2_ * v.data[i] + (1.0 - beta2_) * g.data[i] * g.data[i];
      const double mhat = m.data[i] / bc1;
      const double vhat = v.data[i] / bc2;
      p.data[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

void AdamOptimizer::save_into(TrainerState& state) const {
  state.adam_t = t_;
  state.adam_m = m_;
  state.adam_v = v_;
}

void AdamOptimizer::load_from(const TrainerState& state, const ParamStore& params) {
  if (static_cast<int>(state.adam_m.size()) != params.count() ||
      static_cast<int>(state.adam_v.size()) != params.count())
    throw ValidationError("AdamOptimizer: checkpoint moments do not match parameter count");
  t_ = state.adam_t;
  m_ = state.adam_m;
  v_ = state.adam_v;
}

std::string TrainLogRecord::to_line() const {
  std::ostringstream os;
  os << "iter=" << iteration << " epoch=" << epoch << " s=";
  for (std::size_t i = 0; i < steps.size(); ++i) os << (i ? "," : "") << steps[i];
  os << " mask=";
  for (std::size_t i = 0; i < mask_kinds.size(); ++i) os << (i ? "," : "") << mask_kinds[i];
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                " loss=%.9f ce=%.9f smo=%.9f bd=%.9f aux_ce=%.9f aux_smo=%.9f wall_ms=%.3f",
                losses.total, losses.ce, losses.smo, losses.bd, losses.aux_ce, losses.aux_smo,
                wall_ms);
  os << buf;
  return os.str();
}

namespace {

VideoTensors make_video_tensors(const VideoSample& v, int num_classes, double boundary_std) {
  VideoTensors t;
  t.video = &v;
  t.y0_one_hot = one_hot(v.labels, num_classes);
  t.y0_diffusion = to_diffusion_space(t.y0_one_hot);
  t.bsoft = soften_boundaries(hard_boundaries(v.labels), boundary_std);
  return t;
}

}  // namespace

TrainLogRecord train_step(Model& model, AdamOptimizer& opt, const NoiseSchedule& sch,
                          const ExperimentConfig& cfg, const std::vector<const VideoTensors*>& batch,
                          Rng& rng, long long iteration, int epoch) {
  if (batch.empty()) throw ValidationError("train_step: empty batch");
  const auto t0 = std::chrono::steady_clock::now();

  TrainLogRecord rec;
  rec.iteration = iteration;
  rec.epoch = epoch;

  Tape tape;
  Var total;
  for (const VideoTensors* vt : batch) {
    const int s = rng.uniform_int(1, sch.steps);
    const CorruptionRecord corrupt = forward_corrupt(vt->y0_diffusion, s, sch, rng);
    const MaskKind kind = sample_mask_kind(cfg.mask_kinds, rng);
    const ConditionMask mask = make_mask(kind, vt->video->labels, vt->bsoft, rng);
    rec.steps.push_back(s);
    rec.mask_kinds.push_back(mask_kind_char(kind));

    const Model::Encoded enc = model.encode(tape, tape.input(vt->video->features));
    std::vector<double> row_weights(mask.values.begin(), mask.values.end());
    Var cond = tape.scale_rows(enc.cond, std::move(row_weights));
    Var probs = model.decode(tape, tape.input(corrupt.y_s), s, cond);

    LossBreakdown bd;
    Var sample_loss = loss_sum_g(tape, probs, enc.aux, vt->y0_one_hot, vt->bsoft, cfg.loss, &bd);
    rec.losses.ce += bd.ce;
    rec.losses.smo += bd.smo;
    rec.losses.bd += bd.bd;
    rec.losses.aux_ce += bd.aux_ce;
    rec.losses.aux_smo += bd.aux_smo;
    total = total.valid() ? tape.add(total, sample_loss) : sample_loss;
  }
  total = tape.scale(total, 1.0 / static_cast<double>(batch.size()));

  const double loss_value = total.value().data[0];
  if (!std::isfinite(loss_value)) {
    std::ostringstream os;
    os << "train_step: non-finite loss at iteration " << iteration << " (s=";
    for (std::size_t i = 0; i < rec.steps.size(); ++i) os << (i ? "," : "") << rec.steps[i];
    os << ", mask=";
    for (std::size_t i = 0; i < rec.mask_kinds.size(); ++i)
      os << (i ? "," : "") << rec.mask_kinds[i];
    os << ")";
    throw ValidationError(os.str());
  }

  model.params().zero_grads();
  tape.backward(total);
  tape.accumulate_param_grads(model.params());
  opt.step(model.params());

  const double inv = 1.0 / static_cast<double>(batch.size());
  rec.losses.ce *= inv;
  rec.losses.smo *= inv;
  rec.losses.bd *= inv;
  rec.losses.aux_ce *= inv;
  rec.losses.aux_smo *= inv;
  rec.losses.total = loss_value;
  rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
  return rec;
}

TrainResult train(const SyntheticDataset& ds, const ExperimentConfig& cfg,
                  const std::string& out_dir, const std::string& resume_from) {
  cfg.validate();
  if (ds.train_ids.empty()) throw ValidationError("train: empty train split");
  fs::create_directories(out_dir);

  const NoiseSchedule sch = cfg.make_schedule();
  std::vector<VideoTensors> tensors;
  tensors.reserve(ds.train_ids.size());
  for (const std::string& id : ds.train_ids)
    tensors.push_back(make_video_tensors(ds.video(id), ds.num_classes, cfg.boundary_std));

  Model model(cfg.encoder_config(), cfg.decoder_config());
  AdamOptimizer opt(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  Rng rng(cfg.train_seed);
  long long iteration = 0;
  int start_epoch = 0;

  if (!resume_from.empty()) {
    TrainerState state;
    Model loaded = load_checkpoint(resume_from, &state);
    if (loaded.params().count() != model.params().count())
      throw ValidationError("train: resume checkpoint does not match the configured model");
    model = std::move(loaded);
    opt.load_from(state, model.params());
    rng.restore_state(state.rng_state);
    iteration = state.iteration;
    start_epoch = static_cast<int>(state.epoch);
  } else {
    model.init_params(cfg.init_seed);
  }

  {
    std::ofstream cfg_echo(fs::path(out_dir) / "config_resolved.ini",
                           std::ios::binary | std::ios::trunc);
    cfg_echo << cfg.resolved_text();
  }
  std::ofstream log(fs::path(out_dir) / "train_log.txt",
                    resume_from.empty() ? std::ios::trunc : std::ios::app);
  if (!log) throw IoError("train: cannot open log under '" + out_dir + "'");

  const auto save = [&](const std::string& name, int completed_epochs) {
    TrainerState state;
    state.iteration = iteration;
    state.epoch = completed_epochs;
    opt.save_into(state);
    state.rng_state = rng.save_state();
    save_checkpoint((fs::path(out_dir) / name).string(), model, &state, cfg.resolved_text());
  };

  double last_loss = 0.0;
  std::vector<int> order(tensors.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t pos = 0; pos < order.size(); pos += static_cast<std::size_t>(cfg.batch_size)) {
      std::vector<const VideoTensors*> batch;
      for (std::size_t k = pos;
           k < std::min(order.size(), pos + static_cast<std::size_t>(cfg.batch_size)); ++k)
        batch.push_back(&tensors[static_cast<std::size_t>(order[k])]);
      ++iteration;
      const TrainLogRecord rec = train_step(model, opt, sch, cfg, batch, rng, iteration, epoch);
      last_loss = rec.losses.total;
      log << rec.to_line() << "\n";
    }
    if (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0 &&
        epoch + 1 < cfg.epochs)
      save("checkpoint_ep" + std::to_string(epoch + 1) + ".bin", epoch + 1);
  }
  save("checkpoint.bin", cfg.epochs);
  log.flush();

  TrainResult result;
  result.checkpoint_path = (fs::path(out_dir) / "checkpoint.bin").string();
  result.iterations = iteration;
  result.final_loss = last_loss;
  return result;
}

EvalResult evaluate(const SyntheticDataset& ds, const std::vector<std::string>& split,
                    const Model& model, const NoiseSchedule& sch, const EvalSettings& settings) {
  if (split.empty()) throw ValidationError("evaluate: empty split");
  if (settings.threads < 1) throw ConfigError("evaluate: threads must be >= 1");
  const std::vector<int> trajectory = make_skip_trajectory(sch.steps, settings.inference_steps);

  EvalResult result;
  result.video_ids = split;
  result.predictions.resize(split.size());
  result.ground_truth.resize(split.size());
  if (settings.keep_trajectory) result.trajectories.resize(split.size());

  const auto run_one = [&](std::size_t idx) {
    const VideoSample& video = ds.video(split[idx]);
    result.ground_truth[idx] = video.labels;

    Matrix cond;
    if (settings.oracle_decoder) {
      cond = Matrix(video.features.rows, model.decoder_config().cond_dim);
    } else {
      cond = model.encode_value(video.features).cond;
      if (settings.cond_mask != MaskKind::N) {
        Rng mask_rng(mix_seed(settings.seed, "mask:" + video.id));
        const BoundarySoft bsoft =
            soften_boundaries(hard_boundaries(video.labels), settings.boundary_std);
        cond = apply_mask(cond, make_mask(settings.cond_mask, video.labels, bsoft, mask_rng));
      }
    }

    Denoiser denoiser;
    if (settings.oracle_decoder) {
      const Matrix truth = one_hot(video.labels, ds.num_classes);
      denoiser = [truth](const Matrix&, int, const Matrix&) { return truth; };
    } else {
      denoiser = [&model](const Matrix& state, int step, const Matrix& c) {
        return model.decode_value(state, step, c);
      };
    }

    const InferenceResult inf =
        run_inference(denoiser, cond, ds.num_classes, sch, trajectory,
                      mix_seed(settings.seed, "video:" + video.id), settings.keep_trajectory);
    result.predictions[idx] = argmax_rows(inf.final_probs);
    if (settings.keep_trajectory) result.trajectories[idx] = inf;
  };

  if (settings.threads == 1) {
    for (std::size_t i = 0; i < split.size(); ++i) run_one(i);
  } else {
    std::vector<std::thread> workers;
    const int n_threads = std::min<int>(settings.threads, static_cast<int>(split.size()));
    for (int w = 0; w < n_threads; ++w) {
      workers.emplace_back([&, w] {
        for (std::size_t i = static_cast<std::size_t>(w); i < split.size();
             i += static_cast<std::size_t>(n_threads))
          run_one(i);
      });
    }
    for (std::thread& t : workers) t.join();
  }

  result.report = evaluate_split(result.predictions, result.ground_truth, settings.metric_opts);
  return result;
}

}  // namespace diffseg
