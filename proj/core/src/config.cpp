// SPDX-License-Identifier: Apache-2.0
#include "diffseg/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "diffseg/errors.hpp"

namespace diffseg {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);  // shortest round-trip form
}

struct RawConfig {
  // section -> ordered key/value pairs
  std::map<std::string, std::map<std::string, std::string>> sections;
};

RawConfig parse_raw(const std::string& text) {
  RawConfig raw;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config line " + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw ConfigError("config line " + std::to_string(lineno) + ": empty section name");
      raw.sections[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value, got '" +
                        line + "'");
    if (section.empty())
      throw ConfigError("config line " + std::to_string(lineno) + ": key before any [section]");
    const std::string key = trim(line.substr(0, eq));
    if (raw.sections[section].contains(key))
      throw ConfigError("config: duplicate key '" + section + "." + key + "'");
    raw.sections[section][key] = trim(line.substr(eq + 1));
  }
  return raw;
}

/// Typed access that tracks which keys were consumed so leftovers can be
/// rejected by name.
class SectionReader {
 public:
  SectionReader(const RawConfig& raw, const std::string& name) : name_(name) {
    const auto it = raw.sections.find(name);
    if (it != raw.sections.end()) entries_ = &it->second;
  }

  bool has(const std::string& key) const { return entries_ && entries_->contains(key); }

  std::string get_string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    consumed_.insert(key);
    return entries_->at(key);
  }
  long long get_int(const std::string& key, long long fallback) {
    if (!has(key)) return fallback;
    consumed_.insert(key);
    const std::string& v = entries_->at(key);
    try {
      std::size_t pos = 0;
      const long long out = std::stoll(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return out;
    } catch (const std::exception&) {
      throw ConfigError("config: '" + name_ + "." + key + "' is not an integer: '" + v + "'");
    }
  }
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    consumed_.insert(key);
    const std::string& v = entries_->at(key);
    try {
      std::size_t pos = 0;
      const std::uint64_t out = std::stoull(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return out;
    } catch (const std::exception&) {
      throw ConfigError("config: '" + name_ + "." + key + "' is not an unsigned integer: '" + v +
                        "'");
    }
  }
  double get_double(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    consumed_.insert(key);
    const std::string& v = entries_->at(key);
    try {
      std::size_t pos = 0;
      const double out = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return out;
    } catch (const std::exception&) {
      throw ConfigError("config: '" + name_ + "." + key + "' is not a number: '" + v + "'");
    }
  }
  std::vector<int> get_int_list(const std::string& key, std::vector<int> fallback) {
    if (!has(key)) return fallback;
    const std::string v = get_string(key, "");
    std::vector<int> out;
    std::istringstream is(v);
    std::string tok;
    while (std::getline(is, tok, ',')) {
      tok = trim(tok);
      if (tok.empty()) continue;
      try {
        out.push_back(std::stoi(tok));
      } catch (const std::exception&) {
        throw ConfigError("config: '" + name_ + "." + key + "' has non-integer entry '" + tok +
                          "'");
      }
    }
    return out;
  }

  void reject_unconsumed() const {
    if (!entries_) return;
    for (const auto& [key, value] : *entries_)
      if (!consumed_.contains(key))
        throw ConfigError("config: unknown key '" + name_ + "." + key + "'");
  }

 private:
  std::string name_;
  const std::map<std::string, std::string>* entries_ = nullptr;
  std::set<std::string> consumed_;
};

TaskGrammar default_grammar(int num_classes) {
  // Three ordered phases walking through the class list, every second class
  // optional. Matches the reference benchmark when num_classes == 6.
  TaskGrammar g;
  const int phases = 3;
  for (int p = 0; p < phases; ++p) {
    std::vector<TaskGrammar::Candidate> cands;
    for (int c = p * num_classes / phases; c < (p + 1) * num_classes / phases; ++c)
      cands.push_back({c, c % 2 == 0 ? 1.0 : 0.6});
    g.phases.push_back(std::move(cands));
  }
  g.class_durations.assign(static_cast<std::size_t>(num_classes), {40.0, 12.0, 10});
  g.swap_prob = 0.2;
  return g;
}

std::string grammar_phase_string(const std::vector<TaskGrammar::Candidate>& phase) {
  std::string out;
  for (std::size_t i = 0; i < phase.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(phase[i].class_id) + ":" + fmt_double(phase[i].prob);
  }
  return out;
}

std::vector<TaskGrammar::Candidate> parse_phase(const std::string& name, const std::string& v) {
  std::vector<TaskGrammar::Candidate> out;
  std::istringstream is(v);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    const auto colon = tok.find(':');
    try {
      if (colon == std::string::npos) {
        out.push_back({std::stoi(tok), 1.0});
      } else {
        out.push_back({std::stoi(tok.substr(0, colon)), std::stod(tok.substr(colon + 1))});
      }
    } catch (const std::exception&) {
      throw ConfigError("config: malformed phase entry '" + tok + "' in '" + name + "'");
    }
  }
  if (out.empty()) throw ConfigError("config: empty phase '" + name + "'");
  return out;
}

}  // namespace

NoiseSchedule ExperimentConfig::make_schedule() const {
  return make_linear_schedule(schedule_steps, beta_start, beta_end, eta);
}

EncoderConfig ExperimentConfig::encoder_config() const {
  EncoderConfig e;
  e.layers = encoder_layers;
  e.width = encoder_width;
  e.input_dim = data.feature_dim;
  e.num_classes = data.num_classes;
  e.tap_layers = encoder_taps;
  return e;
}

DecoderConfig ExperimentConfig::decoder_config() const {
  DecoderConfig d;
  d.layers = decoder_layers;
  d.width = decoder_width;
  d.step_embed_dim = step_embed_dim;
  d.num_classes = data.num_classes;
  d.cond_dim = encoder_config().cond_dim();
  d.total_steps = schedule_steps;
  return d;
}

EvalOptions ExperimentConfig::eval_options() const {
  EvalOptions o;
  o.acc_aggregation = acc_aggregation;
  o.iou_tie = iou_tie;
  return o;
}

void ExperimentConfig::validate() const {
  data.validate();
  grammar.validate(data.num_classes);
  encoder_config().validate();
  decoder_config().validate();
  loss.validate();
  make_schedule();  // range checks
  if (epochs < 0) throw ConfigError("config: train.epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("config: train.batch_size must be >= 1");
  if (!(learning_rate >= 0)) throw ConfigError("config: train.learning_rate must be >= 0");
  if (!(boundary_std > 0)) throw ConfigError("config: train.boundary_std must be > 0");
  if (checkpoint_every < 0) throw ConfigError("config: train.checkpoint_every must be >= 0");
  if (mask_kinds.empty()) throw ConfigError("config: train.mask_kinds must be nonempty");
  if (inference_steps < 1 || inference_steps > schedule_steps)
    throw ConfigError("config: eval.steps outside [1, schedule.steps]");
}

ExperimentConfig parse_experiment_config(const std::string& text) {
  const RawConfig raw = parse_raw(text);
  for (const auto& [section, _] : raw.sections) {
    if (section != "data" && section != "schedule" && section != "model" && section != "losses" &&
        section != "train" && section != "eval")
      throw ConfigError("config: unknown section '[" + section + "]'");
  }

  ExperimentConfig cfg;

  SectionReader data(raw, "data");
  cfg.data.num_classes = static_cast<int>(data.get_int("num_classes", cfg.data.num_classes));
  cfg.data.feature_dim = static_cast<int>(data.get_int("feature_dim", cfg.data.feature_dim));
  cfg.data.n_videos = static_cast<int>(data.get_int("videos", cfg.data.n_videos));
  cfg.data.n_train = static_cast<int>(data.get_int("train_videos", cfg.data.n_train));
  cfg.data.length_min = static_cast<int>(data.get_int("length_min", cfg.data.length_min));
  cfg.data.length_max = static_cast<int>(data.get_int("length_max", cfg.data.length_max));
  cfg.data.noise_std = data.get_double("noise_std", cfg.data.noise_std);
  cfg.data.blend_width = static_cast<int>(data.get_int("blend_width", cfg.data.blend_width));
  cfg.data.seed = data.get_u64("seed", cfg.data.seed);

  cfg.grammar = default_grammar(cfg.data.num_classes);
  const int phases = static_cast<int>(
      data.get_int("phases", static_cast<long long>(cfg.grammar.phases.size())));
  if (phases < 1) throw ConfigError("config: data.phases must be >= 1");
  if (phases != static_cast<int>(cfg.grammar.phases.size()) || data.has("phase0")) {
    cfg.grammar.phases.clear();
    for (int p = 0; p < phases; ++p) {
      const std::string key = "phase" + std::to_string(p);
      const std::string v = data.get_string(key, "");
      if (v.empty()) throw ConfigError("config: missing 'data." + key + "' for phases=" +
                                       std::to_string(phases));
      cfg.grammar.phases.push_back(parse_phase("data." + key, v));
    }
  }
  cfg.grammar.swap_prob = data.get_double("swap_prob", cfg.grammar.swap_prob);
  {
    const double mean = data.get_double("dur_mean", 40.0);
    const double std_dev = data.get_double("dur_std", 12.0);
    const int min = static_cast<int>(data.get_int("dur_min", 10));
    cfg.grammar.class_durations.assign(static_cast<std::size_t>(cfg.data.num_classes),
                                       {mean, std_dev, min});
  }
  for (int c = 0; c < cfg.data.num_classes; ++c) {
    const std::string key = "dur" + std::to_string(c);
    if (!data.has(key)) continue;
    const std::string v = data.get_string(key, "");
    std::istringstream is(v);
    std::string m, s, mn;
    if (!std::getline(is, m, ',') || !std::getline(is, s, ',') || !std::getline(is, mn))
      throw ConfigError("config: 'data." + key + "' must be 'mean,std,min'");
    try {
      cfg.grammar.class_durations[static_cast<std::size_t>(c)] = {std::stod(trim(m)),
                                                                  std::stod(trim(s)),
                                                                  std::stoi(trim(mn))};
    } catch (const std::exception&) {
      throw ConfigError("config: malformed 'data." + key + "'");
    }
  }
  data.reject_unconsumed();

  SectionReader sched(raw, "schedule");
  cfg.schedule_steps = static_cast<int>(sched.get_int("steps", cfg.schedule_steps));
  cfg.beta_start = sched.get_double("beta_start", cfg.beta_start);
  cfg.beta_end = sched.get_double("beta_end", cfg.beta_end);
  cfg.eta = sched.get_double("eta", cfg.eta);
  sched.reject_unconsumed();

  SectionReader model(raw, "model");
  cfg.encoder_layers = static_cast<int>(model.get_int("encoder_layers", cfg.encoder_layers));
  cfg.encoder_width = static_cast<int>(model.get_int("encoder_width", cfg.encoder_width));
  cfg.encoder_taps = model.get_int_list("encoder_taps", cfg.encoder_taps);
  cfg.decoder_layers = static_cast<int>(model.get_int("decoder_layers", cfg.decoder_layers));
  cfg.decoder_width = static_cast<int>(model.get_int("decoder_width", cfg.decoder_width));
  cfg.step_embed_dim = static_cast<int>(model.get_int("step_embed_dim", cfg.step_embed_dim));
  cfg.init_seed = model.get_u64("init_seed", cfg.init_seed);
  model.reject_unconsumed();

  SectionReader losses(raw, "losses");
  cfg.loss.w_ce = losses.get_double("w_ce", cfg.loss.w_ce);
  cfg.loss.w_smo = losses.get_double("w_smo", cfg.loss.w_smo);
  cfg.loss.w_bd = losses.get_double("w_bd", cfg.loss.w_bd);
  cfg.loss.w_aux = losses.get_double("w_aux", cfg.loss.w_aux);
  cfg.loss.smo_clip = losses.get_double("smo_clip", cfg.loss.smo_clip);
  cfg.loss.log_eps = losses.get_double("log_eps", cfg.loss.log_eps);
  losses.reject_unconsumed();

  SectionReader train(raw, "train");
  cfg.epochs = static_cast<int>(train.get_int("epochs", cfg.epochs));
  cfg.batch_size = static_cast<int>(train.get_int("batch_size", cfg.batch_size));
  cfg.learning_rate = train.get_double("learning_rate", cfg.learning_rate);
  cfg.adam_beta1 = train.get_double("adam_beta1", cfg.adam_beta1);
  cfg.adam_beta2 = train.get_double("adam_beta2", cfg.adam_beta2);
  cfg.adam_eps = train.get_double("adam_eps", cfg.adam_eps);
  cfg.train_seed = train.get_u64("seed", cfg.train_seed);
  cfg.mask_kinds = parse_mask_kinds(
      train.get_string("mask_kinds", mask_kinds_string(cfg.mask_kinds)));
  cfg.boundary_std = train.get_double("boundary_std", cfg.boundary_std);
  cfg.checkpoint_every = static_cast<int>(train.get_int("checkpoint_every", cfg.checkpoint_every));
  train.reject_unconsumed();

  SectionReader eval(raw, "eval");
  cfg.inference_steps = static_cast<int>(eval.get_int("steps", cfg.inference_steps));
  cfg.eval_seed = eval.get_u64("seed", cfg.eval_seed);
  {
    const std::string acc = eval.get_string("acc_aggregation", "frame");
    if (acc == "frame")
      cfg.acc_aggregation = AccAggregation::FrameWeighted;
    else if (acc == "video")
      cfg.acc_aggregation = AccAggregation::VideoAveraged;
    else
      throw ConfigError("config: eval.acc_aggregation must be 'frame' or 'video'");
    const std::string tie = eval.get_string("iou_tie", "ge");
    if (tie == "ge")
      cfg.iou_tie = IouTieRule::GreaterEqual;
    else if (tie == "gt")
      cfg.iou_tie = IouTieRule::Greater;
    else
      throw ConfigError("config: eval.iou_tie must be 'ge' or 'gt'");
  }
  eval.reject_unconsumed();

  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_experiment_config(buf.str());
}

std::string ExperimentConfig::resolved_text() const {
  std::ostringstream os;
  os << "[data]\n"
     << "num_classes=" << data.num_classes << "\n"
     << "feature_dim=" << data.feature_dim << "\n"
     << "videos=" << data.n_videos << "\n"
     << "train_videos=" << data.n_train << "\n"
     << "length_min=" << data.length_min << "\n"
     << "length_max=" << data.length_max << "\n"
     << "noise_std=" << fmt_double(data.noise_std) << "\n"
     << "blend_width=" << data.blend_width << "\n"
     << "seed=" << data.seed << "\n"
     << "phases=" << grammar.phases.size() << "\n";
  for (std::size_t p = 0; p < grammar.phases.size(); ++p)
    os << "phase" << p << "=" << grammar_phase_string(grammar.phases[p]) << "\n";
  os << "swap_prob=" << fmt_double(grammar.swap_prob) << "\n";
  for (std::size_t c = 0; c < grammar.class_durations.size(); ++c) {
    const TaskGrammar::Duration& d = grammar.class_durations[c];
    os << "dur" << c << "=" << fmt_double(d.mean) << "," << fmt_double(d.std) << "," << d.min
       << "\n";
  }
  os << "\n[schedule]\n"
     << "steps=" << schedule_steps << "\n"
     << "beta_start=" << fmt_double(beta_start) << "\n"
     << "beta_end=" << fmt_double(beta_end) << "\n"
     << "eta=" << fmt_double(eta) << "\n";
  os << "\n[model]\n"
     << "encoder_layers=" << encoder_layers << "\n"
     << "encoder_width=" << encoder_width << "\n"
     << "encoder_taps=";
  const std::vector<int> taps = encoder_config().resolved_taps();
  for (std::size_t i = 0; i < taps.size(); ++i) os << (i ? "," : "") << taps[i];
  os << "\n"
     << "decoder_layers=" << decoder_layers << "\n"
     << "decoder_width=" << decoder_width << "\n"
     << "step_embed_dim=" << step_embed_dim << "\n"
     << "init_seed=" << init_seed << "\n";
  os << "\n[losses]\n"
     << "w_ce=" << fmt_double(loss.w_ce) << "\n"
     << "w_smo=" << fmt_double(loss.w_smo) << "\n"
     << "w_bd=" << fmt_double(loss.w_bd) << "\n"
     << "w_aux=" << fmt_double(loss.w_aux) << "\n"
     << "smo_clip=" << fmt_double(loss.smo_clip) << "\n"
     << "log_eps=" << fmt_double(loss.log_eps) << "\n";
  os << "\n[train]\n"
     << "epochs=" << epochs << "\n"
     << "batch_size=" << batch_size << "\n"
     << "learning_rate=" << fmt_double(learning_rate) << "\n"
     << "adam_beta1=" << fmt_double(adam_beta1) << "\n"
     << "adam_beta2=" << fmt_double(adam_beta2) << "\n"
     << "adam_eps=" << fmt_double(adam_eps) << "\n"
     << "seed=" << train_seed << "\n"
     << "mask_kinds=" << mask_kinds_string(mask_kinds) << "\n"
     << "boundary_std=" << fmt_double(boundary_std) << "\n"
     << "checkpoint_every=" << checkpoint_every << "\n";
  os << "\n[eval]\n"
     << "steps=" << inference_steps << "\n"
     << "seed=" << eval_seed << "\n"
     << "acc_aggregation="
     << (acc_aggregation == AccAggregation::FrameWeighted ? "frame" : "video") << "\n"
     << "iou_tie=" << (iou_tie == IouTieRule::GreaterEqual ? "ge" : "gt") << "\n";
  return os.str();
}

}  // namespace diffseg
