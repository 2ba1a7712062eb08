#include "sfcgan/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

namespace sfcgan {

namespace {

constexpr double kRawCeiling = 100.0;

void check_config(const SynthConfig& cfg) {
  if (cfg.n < 8) throw ValidationError("synth: n must be at least 8");
  if (cfg.modules < 1) throw ValidationError("synth: modules must be at least 1");
  if (cfg.modules > cfg.n) throw ValidationError("synth: more modules than nodes");
  if (cfg.noise_std < 0.0) throw ValidationError("synth: noise_std must be non-negative");
  if (cfg.per_class < 1) throw ValidationError("synth: per_class must be at least 1");
  if (cfg.classes < 1) throw ValidationError("synth: classes must be at least 1");
}

int community_of(int node, int n, int modules) {
  return int(int64_t(node) * modules / n);
}

}  // namespace

Connectome gen_sc(const SynthConfig& cfg, uint64_t subject_seed) {
  check_config(cfg);
  Rng rng(mix_seed(cfg.seed, subject_seed));
  const int n = cfg.n;
  std::vector<double> raw(size_t(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      bool within = community_of(i, n, cfg.modules) == community_of(j, n, cfg.modules);
      double w = within ? rng.uniform(60.0, 100.0) : rng.uniform(0.0, 8.0);
      raw[size_t(i) * n + j] = w;
      raw[size_t(j) * n + i] = w;
    }
  }
  auto [sc, used] = normalize_sc(raw, n, kRawCeiling);
  (void)used;
  sc.subject_id = std::to_string(subject_seed);
  return sc;
}

Connectome sc_to_fc_ground_truth(const Connectome& sc, double alpha, double beta,
                                 double noise_std, uint64_t noise_seed) {
  if (sc.domain != Domain::SC)
    throw ValidationError("ground-truth mapping expects SC input");
  if (noise_std < 0.0) throw ValidationError("noise_std must be non-negative");
  const int n = sc.n;

  std::vector<double> sq(size_t(n) * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      double s = sc.at(i, k);
      if (s == 0.0) continue;
      for (int j = 0; j < n; ++j) sq[size_t(i) * n + j] += s * sc.at(k, j);
    }

  Connectome fc;
  fc.n = n;
  fc.domain = Domain::FC;
  fc.subject_id = sc.subject_id;
  fc.label = sc.label;
  fc.values.assign(size_t(n) * n, 0.0);
  for (size_t k = 0; k < fc.values.size(); ++k)
    fc.values[k] = std::tanh(alpha * (sc.values[k] + beta * sq[k] / double(n)));

  Rng rng(noise_seed);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double e = noise_std == 0.0 ? 0.0 : noise_std * rng.gaussian();
      fc.at(i, j) += e;
      fc.at(j, i) += e;
    }

  fc.values = symmetrize(fc.values, n, n);
  for (auto& v : fc.values) v = std::clamp(v, -1.0, 1.0);
  for (int i = 0; i < n; ++i) fc.at(i, i) = 1.0;
  validate_connectome(fc);
  return fc;
}

DatasetManifest gen_dataset(const SynthConfig& cfg, const std::string& out_dir) {
  check_config(cfg);
  if (cfg.modules + cfg.classes - 1 > cfg.n)
    throw ValidationError("synth: class with the most communities exceeds node count");

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir))
    throw IoError("cannot create output directory " + out_dir);

  DatasetManifest m;
  m.n = cfg.n;
  m.sc_max = kRawCeiling;
  const int train_per_class = cfg.per_class * 4 / 5;
  int idx = 0;
  for (int cls = 0; cls < cfg.classes; ++cls) {
    SynthConfig class_cfg = cfg;
    class_cfg.modules = cfg.modules + cls;
    for (int k = 0; k < cfg.per_class; ++k, ++idx) {
      Connectome sc = gen_sc(class_cfg, uint64_t(2 * idx));
      Connectome fc = sc_to_fc_ground_truth(sc, cfg.alpha, cfg.beta, cfg.noise_std,
                                            mix_seed(cfg.seed, uint64_t(2 * idx + 1)));
      SubjectEntry e;
      e.id = "s" + std::to_string(idx);
      e.fc_path = (fs::path(out_dir) / (e.id + "_fc.csv")).string();
      e.sc_path = (fs::path(out_dir) / (e.id + "_sc.csv")).string();
      e.label = cls;
      e.split = k < train_per_class ? Split::train : Split::test;
      save_connectome(fc, e.fc_path);
      save_connectome(sc, e.sc_path);
      m.subjects.push_back(e);
    }
  }
  save_manifest(m, (fs::path(out_dir) / "manifest.json").string());
  return m;
}

}  // namespace sfcgan
