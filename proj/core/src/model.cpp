// SPDX-License-Identifier: Apache-2.0
#include "diffseg/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "binio.hpp"
#include "diffseg/rng.hpp"

namespace diffseg {

namespace {

constexpr char kCheckpointMagic[4] = {'D', 'S', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr int kKernel = 3;

std::string layer_key(const char* net, int layer, const char* leaf) {
  std::ostringstream os;
  os << net << ".l" << layer << "." << leaf;
  return os.str();
}

void write_matrix(std::ostream& os, const Matrix& m) {
  binio::write_u32(os, static_cast<std::uint32_t>(m.rows));
  binio::write_u32(os, static_cast<std::uint32_t>(m.cols));
  for (double v : m.data) binio::write_f64(os, v);
}

Matrix read_matrix(binio::Reader& r) {
  const int rows = static_cast<int>(r.read_u32());
  const int cols = static_cast<int>(r.read_u32());
  if (rows < 0 || cols < 0 || static_cast<long long>(rows) * cols > (1ll << 28))
    r.fail("implausible matrix shape " + std::to_string(rows) + "x" + std::to_string(cols));
  Matrix m(rows, cols);
  for (double& v : m.data) v = r.read_f64();
  return m;
}

}  // namespace

std::vector<int> EncoderConfig::resolved_taps() const {
  if (!tap_layers.empty()) return tap_layers;
  return {layers};
}

void EncoderConfig::validate() const {
  if (layers < 1) throw ConfigError("encoder: layers must be >= 1");
  if (width < 1) throw ConfigError("encoder: width must be >= 1");
  if (input_dim < 1) throw ConfigError("encoder: input_dim must be >= 1");
  if (num_classes < 2) throw ConfigError("encoder: num_classes must be >= 2");
  for (int t : resolved_taps())
    if (t < 1 || t > layers)
      throw ConfigError("encoder: tap layer " + std::to_string(t) + " outside [1, " +
                        std::to_string(layers) + "]");
}

void DecoderConfig::validate() const {
  if (layers < 1) throw ConfigError("decoder: layers must be >= 1");
  if (width < 1) throw ConfigError("decoder: width must be >= 1");
  if (num_classes < 2) throw ConfigError("decoder: num_classes must be >= 2");
  if (cond_dim < 1) throw ConfigError("decoder: cond_dim must be >= 1");
  if (step_embed_dim < 2 || step_embed_dim % 2 != 0)
    throw ConfigError("decoder: step_embed_dim must be even and >= 2");
  if (total_steps < 1) throw ConfigError("decoder: total_steps must be >= 1");
}

Matrix step_embedding(int step, int dim, int total_steps) {
  if (dim < 2 || dim % 2 != 0)
    throw ConfigError("step_embedding: dim must be even and >= 2, got " + std::to_string(dim));
  if (step < 0 || step > total_steps)
    throw ConfigError("step_embedding: step " + std::to_string(step) + " outside [0, " +
                      std::to_string(total_steps) + "]");
  const int half = dim / 2;
  Matrix emb(1, dim);
  for (int i = 0; i < half; ++i) {
    const double exponent = half > 1 ? static_cast<double>(i) / (half - 1) : 0.0;
    const double freq = std::pow(10000.0, -exponent);
    emb.at(0, i) = std::sin(step * freq);
    emb.at(0, half + i) = std::cos(step * freq);
  }
  return emb;
}

Model::Model(EncoderConfig enc, DecoderConfig dec) : enc_(std::move(enc)), dec_(std::move(dec)) {
  if (dec_.cond_dim == 0) dec_.cond_dim = enc_.cond_dim();
  enc_.validate();
  dec_.validate();
  if (enc_.num_classes != dec_.num_classes)
    throw ConfigError("model: encoder and decoder class counts differ");
  if (dec_.cond_dim != enc_.cond_dim())
    throw ConfigError("model: decoder cond_dim " + std::to_string(dec_.cond_dim) +
                      " != encoder cond dim " + std::to_string(enc_.cond_dim()));

  params_.add("enc.in.w", Matrix(enc_.input_dim, enc_.width));
  params_.add("enc.in.b", Matrix(1, enc_.width));
  for (int l = 1; l <= enc_.layers; ++l) {
    params_.add(layer_key("enc", l, "conv.w"), Matrix(enc_.width, enc_.width * kKernel));
    params_.add(layer_key("enc", l, "conv.b"), Matrix(1, enc_.width));
    params_.add(layer_key("enc", l, "proj.w"), Matrix(enc_.width, enc_.width));
    params_.add(layer_key("enc", l, "proj.b"), Matrix(1, enc_.width));
  }
  params_.add("enc.head.w", Matrix(enc_.width, enc_.num_classes));
  params_.add("enc.head.b", Matrix(1, enc_.num_classes));

  params_.add("dec.in.w", Matrix(dec_.cond_dim + dec_.num_classes, dec_.width));
  params_.add("dec.in.b", Matrix(1, dec_.width));
  params_.add("dec.step.w", Matrix(dec_.step_embed_dim, dec_.width));
  params_.add("dec.step.b", Matrix(1, dec_.width));
  for (int l = 1; l <= dec_.layers; ++l) {
    params_.add(layer_key("dec", l, "conv.w"), Matrix(dec_.width, dec_.width * kKernel));
    params_.add(layer_key("dec", l, "conv.b"), Matrix(1, dec_.width));
    params_.add(layer_key("dec", l, "proj.w"), Matrix(dec_.width, dec_.width));
    params_.add(layer_key("dec", l, "proj.b"), Matrix(1, dec_.width));
  }
  params_.add("dec.head.w", Matrix(dec_.width, dec_.num_classes));
  params_.add("dec.head.b", Matrix(1, dec_.num_classes));
}

void Model::init_params(std::uint64_t seed) {
  Rng rng(seed);
  for (int i = 0; i < params_.count(); ++i) {
    Matrix& w = params_.value(i);
    const bool is_bias = w.rows == 1 && params_.name(i).ends_with(".b");
    if (is_bias) {
      std::fill(w.data.begin(), w.data.end(), 0.0);
      continue;
    }
    // Weight layouts put fan-in on the rows (matmul) or in the packed
    // (cin * k) columns (conv). For conv blocks, rows == width == cout and
    // cols == cin * k, so fan-in is cols; for matmul weights fan-in is rows.
    const bool is_conv = params_.name(i).find("conv.w") != std::string::npos;
    const int fan_in = is_conv ? w.cols : w.rows;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : w.data) v = bound * (2.0 * rng.uniform() - 1.0);
  }
}

namespace {

Var residual_block(Tape& t, const ParamStore& p, Var x, const char* net, int layer) {
  const int dilation = 1 << (layer - 1);
  Var c = t.conv1d(x, t.param(p, layer_key(net, layer, "conv.w")), dilation);
  c = t.add_row(c, t.param(p, layer_key(net, layer, "conv.b")));
  c = t.relu(c);
  Var proj = t.matmul(c, t.param(p, layer_key(net, layer, "proj.w")));
  proj = t.add_row(proj, t.param(p, layer_key(net, layer, "proj.b")));
  return t.add(x, proj);
}

}  // namespace

Model::Encoded Model::encode(Tape& t, Var features) const {
  if (features.cols() != enc_.input_dim)
    throw ShapeError("encode: features " + features.value().shape_str() + ", expected L x " +
                     std::to_string(enc_.input_dim));
  Var x = t.add_row(t.matmul(features, t.param(params_, "enc.in.w")), t.param(params_, "enc.in.b"));
  const std::vector<int> taps = enc_.resolved_taps();
  Var cond;
  for (int l = 1; l <= enc_.layers; ++l) {
    x = residual_block(t, params_, x, "enc", l);
    if (std::find(taps.begin(), taps.end(), l) != taps.end())
      cond = cond.valid() ? t.concat_cols(cond, x) : x;
  }
  Var aux = t.softmax_rows(
      t.add_row(t.matmul(x, t.param(params_, "enc.head.w")), t.param(params_, "enc.head.b")));
  return {cond, aux};
}

Var Model::decode(Tape& t, Var state, int step, Var cond) const {
  if (state.cols() != dec_.num_classes)
    throw ShapeError("decode: state " + state.value().shape_str() + ", expected L x " +
                     std::to_string(dec_.num_classes));
  if (cond.cols() != dec_.cond_dim)
    throw ShapeError("decode: conditioning " + cond.value().shape_str() + ", expected L x " +
                     std::to_string(dec_.cond_dim));
  if (state.rows() != cond.rows())
    throw ShapeError("decode: state and conditioning lengths differ");

  Var x = t.concat_cols(cond, state);
  x = t.add_row(t.matmul(x, t.param(params_, "dec.in.w")), t.param(params_, "dec.in.b"));
  Var emb = t.input(step_embedding(step, dec_.step_embed_dim, dec_.total_steps));
  emb = t.add_row(t.matmul(emb, t.param(params_, "dec.step.w")), t.param(params_, "dec.step.b"));
  x = t.add_row(x, emb);
  for (int l = 1; l <= dec_.layers; ++l) x = residual_block(t, params_, x, "dec", l);
  return t.softmax_rows(
      t.add_row(t.matmul(x, t.param(params_, "dec.head.w")), t.param(params_, "dec.head.b")));
}

Model::EncodedValue Model::encode_value(const Matrix& features) const {
  Tape t;
  const Encoded e = encode(t, t.input(features));
  return {e.cond.value(), e.aux.value()};
}

Matrix Model::decode_value(const Matrix& state, int step, const Matrix& cond) const {
  Tape t;
  return decode(t, t.input(state), step, t.input(cond)).value();
}

namespace {

std::string config_echo(const Model& model, const std::string& extra) {
  const EncoderConfig& e = model.encoder_config();
  const DecoderConfig& d = model.decoder_config();
  std::ostringstream os;
  os << "enc.layers=" << e.layers << "\n"
     << "enc.width=" << e.width << "\n"
     << "enc.input_dim=" << e.input_dim << "\n"
     << "enc.num_classes=" << e.num_classes << "\n"
     << "enc.taps=";
  const std::vector<int> taps = e.resolved_taps();
  for (std::size_t i = 0; i < taps.size(); ++i) os << (i ? "," : "") << taps[i];
  os << "\n"
     << "dec.layers=" << d.layers << "\n"
     << "dec.width=" << d.width << "\n"
     << "dec.step_embed_dim=" << d.step_embed_dim << "\n"
     << "dec.total_steps=" << d.total_steps << "\n";
  if (!extra.empty()) os << extra << (extra.back() == '\n' ? "" : "\n");
  return os.str();
}

std::map<std::string, std::string> parse_echo(const std::string& echo) {
  std::map<std::string, std::string> kv;
  std::istringstream is(echo);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model, const TrainerState* trainer,
                     const std::string& extra_echo) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("save_checkpoint: cannot open '" + path + "'");

  binio::write_bytes(os, kCheckpointMagic, 4);
  binio::write_u32(os, kCheckpointVersion);
  binio::write_string(os, config_echo(model, extra_echo));

  const ParamStore& p = model.params();
  binio::write_u32(os, static_cast<std::uint32_t>(p.count()));
  for (int i = 0; i < p.count(); ++i) {
    binio::write_string(os, p.name(i));
    write_matrix(os, p.value(i));
  }

  os.put(trainer ? 1 : 0);
  if (trainer) {
    if (static_cast<int>(trainer->adam_m.size()) != p.count() ||
        static_cast<int>(trainer->adam_v.size()) != p.count())
      throw ValidationError("save_checkpoint: trainer moment count does not match parameters");
    binio::write_u64(os, static_cast<std::uint64_t>(trainer->iteration));
    binio::write_u64(os, static_cast<std::uint64_t>(trainer->epoch));
    binio::write_u64(os, static_cast<std::uint64_t>(trainer->adam_t));
    for (int i = 0; i < p.count(); ++i) {
      write_matrix(os, trainer->adam_m[static_cast<std::size_t>(i)]);
      write_matrix(os, trainer->adam_v[static_cast<std::size_t>(i)]);
    }
    binio::write_string(os, trainer->rng_state);
  }
  os.flush();
  if (!os) throw IoError("save_checkpoint: write failed for '" + path + "'");
}

Model load_checkpoint(const std::string& path, TrainerState* trainer, std::string* extra_echo) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("load_checkpoint: cannot open '" + path + "'");
  binio::Reader r(is, "checkpoint '" + path + "'");

  r.expect_magic(kCheckpointMagic);
  const std::uint32_t version = r.read_u32();
  if (version != kCheckpointVersion)
    r.fail("unsupported format version " + std::to_string(version));
  const std::string echo = r.read_string();
  const auto kv = parse_echo(echo);

  const auto need = [&](const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) r.fail("config echo missing key '" + key + "'");
    return it->second;
  };

  EncoderConfig enc;
  enc.layers = std::stoi(need("enc.layers"));
  enc.width = std::stoi(need("enc.width"));
  enc.input_dim = std::stoi(need("enc.input_dim"));
  enc.num_classes = std::stoi(need("enc.num_classes"));
  {
    std::istringstream taps(need("enc.taps"));
    std::string tok;
    while (std::getline(taps, tok, ',')) enc.tap_layers.push_back(std::stoi(tok));
  }
  DecoderConfig dec;
  dec.layers = std::stoi(need("dec.layers"));
  dec.width = std::stoi(need("dec.width"));
  dec.step_embed_dim = std::stoi(need("dec.step_embed_dim"));
  dec.total_steps = std::stoi(need("dec.total_steps"));
  dec.num_classes = enc.num_classes;

  Model model(enc, dec);
  ParamStore& p = model.params();
  const std::uint32_t n = r.read_u32();
  if (static_cast<int>(n) != p.count())
    r.fail("parameter count " + std::to_string(n) + " != expected " + std::to_string(p.count()));
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::string name = r.read_string();
    const int idx = p.index_of(name);
    if (idx < 0) r.fail("unknown parameter block '" + name + "'");
    Matrix m = read_matrix(r);
    require_same_shape(p.value(idx), m, "load_checkpoint");
    p.value(idx) = std::move(m);
  }

  char has_trainer = 0;
  r.read_bytes(&has_trainer, 1);
  if (has_trainer) {
    TrainerState ts;
    ts.iteration = static_cast<std::int64_t>(r.read_u64());
    ts.epoch = static_cast<std::int64_t>(r.read_u64());
    ts.adam_t = static_cast<std::int64_t>(r.read_u64());
    for (int i = 0; i < p.count(); ++i) {
      ts.adam_m.push_back(read_matrix(r));
      ts.adam_v.push_back(read_matrix(r));
    }
    ts.rng_state = r.read_string(1 << 16);
    if (trainer) *trainer = std::move(ts);
  } else if (trainer) {
    throw ValidationError("load_checkpoint: '" + path + "' has no trainer state to resume from");
  }
  if (extra_echo) *extra_echo = echo;
  return model;
}

}  // namespace diffseg
