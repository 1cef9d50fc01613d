// SPDX-License-Identifier: Apache-2.0
#include "diffseg/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "binio.hpp"
#include "diffseg/rng.hpp"

namespace fs = std::filesystem;

namespace diffseg {

namespace {

constexpr char kBlockMagic[4] = {'D', 'S', 'E', 'G'};
constexpr std::uint32_t kBlockVersion = 1;

double quantize_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

void write_block(const std::string& path, const Matrix& m) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("write_dataset: cannot open '" + path + "'");
  binio::write_bytes(os, kBlockMagic, 4);
  binio::write_u32(os, kBlockVersion);
  binio::write_u32(os, static_cast<std::uint32_t>(m.rows));
  binio::write_u32(os, static_cast<std::uint32_t>(m.cols));
  for (double v : m.data) binio::write_f32(os, static_cast<float>(v));
  os.flush();
  if (!os) throw IoError("write_dataset: write failed for '" + path + "'");
}

Matrix read_block(const std::string& path, const std::string& context) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("read_dataset: cannot open '" + path + "'");
  binio::Reader r(is, context);
  r.expect_magic(kBlockMagic);
  const std::uint32_t version = r.read_u32();
  if (version != kBlockVersion) r.fail("unsupported block version " + std::to_string(version));
  const int rows = static_cast<int>(r.read_u32());
  const int cols = static_cast<int>(r.read_u32());
  if (rows < 1 || cols < 1 || static_cast<long long>(rows) * cols > (1ll << 28))
    r.fail("implausible shape " + std::to_string(rows) + "x" + std::to_string(cols));
  Matrix m(rows, cols);
  for (double& v : m.data) v = static_cast<double>(r.read_f32());
  return m;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("write_dataset: cannot open '" + path + "'");
  for (const std::string& l : lines) os << l << "\n";
  os.flush();
  if (!os) throw IoError("write_dataset: write failed for '" + path + "'");
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("read_dataset: cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::string video_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "video_%04d", index);
  return buf;
}

}  // namespace

void TaskGrammar::validate(int num_classes) const {
  if (phases.empty()) throw ConfigError("grammar: needs at least one phase");
  if (static_cast<int>(class_durations.size()) != num_classes)
    throw ConfigError("grammar: " + std::to_string(class_durations.size()) +
                      " duration entries for " + std::to_string(num_classes) + " classes");
  for (const auto& phase : phases) {
    if (phase.empty()) throw ConfigError("grammar: empty phase");
    for (const Candidate& c : phase) {
      if (c.class_id < 0 || c.class_id >= num_classes)
        throw ConfigError("grammar: class id " + std::to_string(c.class_id) + " out of range");
      if (!(c.prob >= 0.0 && c.prob <= 1.0))
        throw ConfigError("grammar: occurrence probability must be in [0, 1]");
    }
  }
  for (const Duration& d : class_durations) {
    if (!(d.mean > 0) || !(d.std >= 0) || d.min < 1)
      throw ConfigError("grammar: durations need mean > 0, std >= 0, min >= 1");
  }
  if (!(swap_prob >= 0.0 && swap_prob <= 1.0))
    throw ConfigError("grammar: swap_prob must be in [0, 1]");
}

int TaskGrammar::max_actions_per_video() const {
  int n = 0;
  for (const auto& phase : phases) n += static_cast<int>(phase.size());
  return n;
}

int TaskGrammar::min_duration() const {
  int m = class_durations.empty() ? 1 : class_durations.front().min;
  for (const Duration& d : class_durations) m = std::min(m, d.min);
  return m;
}

void GeneratorConfig::validate() const {
  if (num_classes < 2) throw ConfigError("generator: num_classes must be >= 2");
  if (feature_dim < 1) throw ConfigError("generator: feature_dim must be >= 1");
  if (n_videos < 1) throw ConfigError("generator: n_videos must be >= 1");
  if (n_train < 0 || n_train > n_videos)
    throw ConfigError("generator: n_train outside [0, n_videos]");
  if (length_min < 2 || length_max < length_min)
    throw ConfigError("generator: need 2 <= length_min <= length_max");
  if (!(noise_std >= 0.0)) throw ConfigError("generator: noise_std must be >= 0");
  if (blend_width < 0 || blend_width % 2 != 0)
    throw ConfigError("generator: blend_width must be even and >= 0");
}

namespace {

struct Realization {
  std::vector<int> actions;  // class per action instance, in order
};

Realization realize_actions(const TaskGrammar& g, Rng& rng) {
  std::vector<std::vector<int>> phase_actions;
  for (const auto& phase : g.phases) {
    std::vector<int> acts;
    for (const TaskGrammar::Candidate& c : phase)
      if (rng.uniform() < c.prob) acts.push_back(c.class_id);
    if (acts.empty()) acts.push_back(phase.front().class_id);
    phase_actions.push_back(std::move(acts));
  }
  if (phase_actions.size() > 1 && rng.uniform() < g.swap_prob) {
    const int k = rng.uniform_int(0, static_cast<int>(phase_actions.size()) - 2);
    std::swap(phase_actions[static_cast<std::size_t>(k)],
              phase_actions[static_cast<std::size_t>(k) + 1]);
  }
  Realization r;
  for (const auto& acts : phase_actions) r.actions.insert(r.actions.end(), acts.begin(), acts.end());
  return r;
}

std::vector<int> realize_durations(const TaskGrammar& g, const std::vector<int>& actions,
                                   int target_len, Rng& rng) {
  std::vector<double> raw(actions.size());
  double total = 0.0;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const TaskGrammar::Duration& d = g.class_durations[static_cast<std::size_t>(actions[i])];
    raw[i] = std::max(static_cast<double>(d.min), d.mean + d.std * rng.normal());
    total += raw[i];
  }
  // Proportional rescale to the target length, durations floored per class.
  std::vector<int> dur(actions.size());
  int assigned = 0;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const int dmin = g.class_durations[static_cast<std::size_t>(actions[i])].min;
    dur[i] = std::max(dmin, static_cast<int>(std::llround(raw[i] * target_len / total)));
    assigned += dur[i];
  }
  // Push the rounding drift onto the longest segments, respecting the floors.
  int drift = target_len - assigned;
  while (drift != 0) {
    if (drift > 0) {
      std::size_t pick = 0;
      for (std::size_t i = 1; i < dur.size(); ++i)
        if (dur[i] > dur[pick]) pick = i;
      ++dur[pick];
      --drift;
    } else {
      int pick = -1;
      for (std::size_t i = 0; i < dur.size(); ++i) {
        const int dmin = g.class_durations[static_cast<std::size_t>(actions[i])].min;
        if (dur[i] > dmin && (pick < 0 || dur[i] > dur[static_cast<std::size_t>(pick)]))
          pick = static_cast<int>(i);
      }
      if (pick < 0)
        throw ConfigError("generator: target length " + std::to_string(target_len) +
                          " infeasible for " + std::to_string(dur.size()) + " actions");
      --dur[static_cast<std::size_t>(pick)];
      ++drift;
    }
  }
  return dur;
}

Matrix blend_weights(const LabelSeq& labels, int num_classes, int blend_width) {
  // Box filter over the one-hot rows: linear cross-fades at the boundaries.
  const int len = static_cast<int>(labels.size());
  const int radius = blend_width / 2;
  Matrix w(len, num_classes);
  for (int i = 0; i < len; ++i) {
    int count = 0;
    for (int j = i - radius; j <= i + radius; ++j) {
      const int jj = std::clamp(j, 0, len - 1);
      w.at(i, labels[static_cast<std::size_t>(jj)]) += 1.0;
      ++count;
    }
    for (int c = 0; c < num_classes; ++c) w.at(i, c) /= count;
  }
  return w;
}

}  // namespace

const VideoSample& SyntheticDataset::video(const std::string& id) const {
  for (const VideoSample& v : videos)
    if (v.id == id) return v;
  throw ValidationError("dataset: unknown video id '" + id + "'");
}

SyntheticDataset generate(const TaskGrammar& grammar, const GeneratorConfig& cfg) {
  cfg.validate();
  grammar.validate(cfg.num_classes);
  if (grammar.max_actions_per_video() * grammar.min_duration() > cfg.length_min)
    throw ConfigError("generator: worst-case realization (" +
                      std::to_string(grammar.max_actions_per_video()) + " actions at minimum " +
                      std::to_string(grammar.min_duration()) +
                      " frames) does not fit length_min " + std::to_string(cfg.length_min));

  SyntheticDataset ds;
  ds.num_classes = cfg.num_classes;
  ds.feature_dim = cfg.feature_dim;
  ds.noise_std = cfg.noise_std;
  ds.blend_width = cfg.blend_width;
  ds.seed = cfg.seed;
  for (int c = 0; c < cfg.num_classes; ++c) ds.class_names.push_back("action_" + std::to_string(c));

  // Unit-norm prototypes, fixed once per dataset.
  Rng proto_rng(mix_seed(cfg.seed, "prototypes"));
  ds.prototypes = Matrix(cfg.num_classes, cfg.feature_dim);
  for (int c = 0; c < cfg.num_classes; ++c) {
    double norm_sq = 0.0;
    for (int d = 0; d < cfg.feature_dim; ++d) {
      const double v = proto_rng.normal();
      ds.prototypes.at(c, d) = v;
      norm_sq += v * v;
    }
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (int d = 0; d < cfg.feature_dim; ++d)
      ds.prototypes.at(c, d) = quantize_f32(ds.prototypes.at(c, d) * inv);
  }

  for (int v = 0; v < cfg.n_videos; ++v) {
    VideoSample video;
    video.id = video_id(v);
    Rng rng(mix_seed(cfg.seed, "video:" + std::to_string(v)));

    const Realization real = realize_actions(grammar, rng);
    const int target_len = rng.uniform_int(cfg.length_min, cfg.length_max);
    const std::vector<int> durations = realize_durations(grammar, real.actions, target_len, rng);

    for (std::size_t a = 0; a < real.actions.size(); ++a)
      video.labels.insert(video.labels.end(), static_cast<std::size_t>(durations[a]),
                          real.actions[a]);

    const Matrix weights = blend_weights(video.labels, cfg.num_classes, cfg.blend_width);
    Matrix feats = matmul(weights, ds.prototypes);
    for (double& x : feats.data) x = quantize_f32(x + cfg.noise_std * rng.normal());
    video.features = std::move(feats);
    ds.videos.push_back(std::move(video));
  }

  for (int v = 0; v < cfg.n_videos; ++v)
    (v < cfg.n_train ? ds.train_ids : ds.test_ids).push_back(ds.videos[static_cast<std::size_t>(v)].id);
  return ds;
}

void write_dataset(const SyntheticDataset& ds, const std::string& dir) {
  fs::create_directories(fs::path(dir) / "features");
  fs::create_directories(fs::path(dir) / "groundTruth");
  fs::create_directories(fs::path(dir) / "splits");

  {
    std::ostringstream meta;
    char buf[64];
    meta << "format_version=1\n"
         << "num_classes=" << ds.num_classes << "\n"
         << "feature_dim=" << ds.feature_dim << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", ds.noise_std);
    meta << "noise_std=" << buf << "\n"
         << "blend_width=" << ds.blend_width << "\n"
         << "seed=" << ds.seed << "\n"
         << "n_videos=" << ds.videos.size() << "\n";
    std::ofstream os(fs::path(dir) / "meta.txt", std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("write_dataset: cannot open meta.txt under '" + dir + "'");
    os << meta.str();
  }

  std::vector<std::string> mapping;
  for (std::size_t c = 0; c < ds.class_names.size(); ++c)
    mapping.push_back(std::to_string(c) + " " + ds.class_names[c]);
  write_lines((fs::path(dir) / "mapping.txt").string(), mapping);

  write_block((fs::path(dir) / "prototypes.bin").string(), ds.prototypes);

  for (const VideoSample& v : ds.videos) {
    write_block((fs::path(dir) / "features" / (v.id + ".bin")).string(), v.features);
    std::vector<std::string> names;
    names.reserve(v.labels.size());
    for (int c : v.labels) names.push_back(ds.class_names[static_cast<std::size_t>(c)]);
    write_lines((fs::path(dir) / "groundTruth" / (v.id + ".txt")).string(), names);
  }
  write_lines((fs::path(dir) / "splits" / "train.bundle").string(), ds.train_ids);
  write_lines((fs::path(dir) / "splits" / "test.bundle").string(), ds.test_ids);
}

SyntheticDataset read_dataset(const std::string& dir) {
  SyntheticDataset ds;

  std::map<std::string, std::string> meta;
  for (const std::string& line : read_lines((fs::path(dir) / "meta.txt").string())) {
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError("read_dataset: malformed meta line '" + line + "'");
    meta[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const auto need = [&](const std::string& key) {
    const auto it = meta.find(key);
    if (it == meta.end()) throw ValidationError("read_dataset: meta.txt missing '" + key + "'");
    return it->second;
  };
  ds.num_classes = std::stoi(need("num_classes"));
  ds.feature_dim = std::stoi(need("feature_dim"));
  ds.noise_std = std::stod(need("noise_std"));
  ds.blend_width = std::stoi(need("blend_width"));
  ds.seed = std::stoull(need("seed"));
  const std::size_t n_videos = std::stoul(need("n_videos"));

  std::map<int, std::string> mapping;
  for (const std::string& line : read_lines((fs::path(dir) / "mapping.txt").string())) {
    std::istringstream is(line);
    int idx;
    std::string name;
    if (!(is >> idx >> name))
      throw ValidationError("read_dataset: malformed mapping line '" + line + "'");
    if (mapping.contains(idx))
      throw ValidationError("read_dataset: duplicate class index " + std::to_string(idx));
    mapping[idx] = name;
  }
  if (static_cast<int>(mapping.size()) != ds.num_classes)
    throw ValidationError("read_dataset: mapping has " + std::to_string(mapping.size()) +
                          " classes, meta says " + std::to_string(ds.num_classes));
  std::map<std::string, int> name_to_class;
  for (int c = 0; c < ds.num_classes; ++c) {
    if (!mapping.contains(c))
      throw ValidationError("read_dataset: mapping missing class index " + std::to_string(c));
    ds.class_names.push_back(mapping[c]);
    if (!name_to_class.emplace(mapping[c], c).second)
      throw ValidationError("read_dataset: duplicate class name '" + mapping[c] + "'");
  }

  ds.prototypes = read_block((fs::path(dir) / "prototypes.bin").string(), "prototypes.bin");
  if (ds.prototypes.rows != ds.num_classes || ds.prototypes.cols != ds.feature_dim)
    throw ValidationError("read_dataset: prototypes shape " + ds.prototypes.shape_str() +
                          " does not match meta");

  ds.train_ids = read_lines((fs::path(dir) / "splits" / "train.bundle").string());
  ds.test_ids = read_lines((fs::path(dir) / "splits" / "test.bundle").string());
  for (const std::string& id : ds.train_ids)
    if (std::find(ds.test_ids.begin(), ds.test_ids.end(), id) != ds.test_ids.end())
      throw ValidationError("read_dataset: video '" + id + "' appears in both splits");

  std::vector<std::string> all_ids = ds.train_ids;
  all_ids.insert(all_ids.end(), ds.test_ids.begin(), ds.test_ids.end());
  if (all_ids.size() != n_videos)
    throw ValidationError("read_dataset: splits list " + std::to_string(all_ids.size()) +
                          " videos, meta says " + std::to_string(n_videos));

  for (const std::string& id : all_ids) {
    VideoSample v;
    v.id = id;
    v.features = read_block((fs::path(dir) / "features" / (id + ".bin")).string(),
                            "features for video '" + id + "'");
    if (v.features.cols != ds.feature_dim)
      throw ValidationError("read_dataset: video '" + id + "' feature dim " +
                            std::to_string(v.features.cols) + " != " +
                            std::to_string(ds.feature_dim));
    for (const std::string& name :
         read_lines((fs::path(dir) / "groundTruth" / (id + ".txt")).string())) {
      const auto it = name_to_class.find(name);
      if (it == name_to_class.end())
        throw ValidationError("read_dataset: video '" + id + "' has unmapped label '" + name + "'");
      v.labels.push_back(it->second);
    }
    if (static_cast<int>(v.labels.size()) != v.features.rows)
      throw ValidationError("read_dataset: video '" + id + "' has " +
                            std::to_string(v.labels.size()) + " labels but " +
                            std::to_string(v.features.rows) + " feature rows");
    ds.videos.push_back(std::move(v));
  }
  return ds;
}

LabelSeq nearest_prototype_labels(const Matrix& features, const Matrix& prototypes) {
  if (features.cols != prototypes.cols)
    throw ShapeError("nearest_prototype_labels: dims differ, " + features.shape_str() + " vs " +
                     prototypes.shape_str());
  LabelSeq out(static_cast<std::size_t>(features.rows));
  for (int i = 0; i < features.rows; ++i) {
    double best = 0.0;
    int arg = 0;
    for (int c = 0; c < prototypes.rows; ++c) {
      double dist = 0.0;
      for (int d = 0; d < features.cols; ++d) {
        const double diff = features.at(i, d) - prototypes.at(c, d);
        dist += diff * diff;
      }
      if (c == 0 || dist < best) {
        best = dist;
        arg = c;
      }
    }
    out[static_cast<std::size_t>(i)] = arg;
  }
  return out;
}

std::vector<LabelSeq> permuted_label_baseline(const std::vector<LabelSeq>& gts,
                                              std::uint64_t seed) {
  std::vector<LabelSeq> out;
  out.reserve(gts.size());
  for (std::size_t v = 0; v < gts.size(); ++v) {
    LabelSeq shuffled = gts[v];
    Rng rng(mix_seed(seed, "permute:" + std::to_string(v)));
    rng.shuffle(shuffled);
    out.push_back(std::move(shuffled));
  }
  return out;
}

}  // namespace diffseg
