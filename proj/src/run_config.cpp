#include "sfcgan/run_config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace sfcgan {

namespace {

using nlohmann::json;

int as_int(const json& v, const std::string& key) {
  if (!v.is_number_integer())
    throw ValidationError("config key '" + key + "' must be an integer");
  return v.get<int>();
}

uint64_t as_u64(const json& v, const std::string& key) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<int64_t>() >= 0))
    throw ValidationError("config key '" + key + "' must be a non-negative integer");
  return v.get<uint64_t>();
}

double as_double(const json& v, const std::string& key) {
  if (!v.is_number())
    throw ValidationError("config key '" + key + "' must be a number");
  return v.get<double>();
}

bool as_bool(const json& v, const std::string& key) {
  if (!v.is_boolean())
    throw ValidationError("config key '" + key + "' must be true or false");
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& key) {
  if (!v.is_string())
    throw ValidationError("config key '" + key + "' must be a string");
  return v.get<std::string>();
}

struct KeyDoc {
  const char* key;
  std::string def;
  const char* doc;
};

std::vector<KeyDoc> key_docs() {
  RunConfig d;
  auto num = [](double v) { return format_general(v, 10); };
  return {
      {"n", std::to_string(d.n), "matrix size generated by synth (nodes per connectome)"},
      {"modules", std::to_string(d.modules), "community count for class 0; class k uses modules+k"},
      {"per_class", std::to_string(d.per_class), "subjects generated per class"},
      {"classes", std::to_string(d.classes), "number of diagnostic classes"},
      {"noise_std", num(d.noise_std), "gaussian noise added to ground-truth FC"},
      {"alpha", num(d.alpha), "gain of the synthetic SC-to-FC mapping"},
      {"beta", num(d.beta), "quadratic-term weight of the mapping"},
      {"seed", std::to_string(d.seed), "master RNG seed for synth and training"},
      {"epochs", std::to_string(d.epochs), "training epochs"},
      {"lr", num(d.lr), "Adam learning rate"},
      {"weight_decay", num(d.weight_decay), "decoupled weight decay"},
      {"batch_size", std::to_string(d.batch_size), "subjects per optimizer step"},
      {"w1", std::to_string(d.w1), "first conv channel width"},
      {"w2", std::to_string(d.w2), "second conv channel width"},
      {"replay_buffer_size", std::to_string(d.replay_buffer_size),
       "fake-history pool capacity per domain"},
      {"replay_enabled", d.replay_enabled ? "true" : "false",
       "train discriminators on pooled past fakes"},
      {"checkpoint_every", std::to_string(d.checkpoint_every),
       "epochs between periodic checkpoints (0: final only)"},
      {"adv_weight", num(d.adv_weight), "adversarial loss weight"},
      {"cyc_weight", num(d.cyc_weight), "cycle-consistency loss weight"},
      {"id_weight", num(d.id_weight), "identity loss weight"},
      {"sp_weight", num(d.sp_weight), "structure-preserving loss weight"},
      {"sp_enabled", d.sp_enabled ? "true" : "false",
       "include the structure-preserving terms"},
      {"sp_pairing", d.sp_pairing, "correlation pairing: literal or paired"},
      {"pcc_row_sum", d.pcc_row_sum ? "true" : "false",
       "sum instead of average the row correlation terms"},
      {"fc_tau", num(d.fc_tau), "absolute FC threshold for graph metrics"},
      {"sc_tau", num(d.sc_tau), "absolute SC threshold for graph metrics"},
      {"top", num(d.top), "edge fraction kept by render edge lists"},
      {"threads", std::to_string(d.threads),
       "worker threads; 1 is the deterministic reference mode"},
      {"data_dir", d.data_dir, "dataset directory (synth writes it, the rest read it)"},
      {"out_dir", d.out_dir, "directory for checkpoints, reports, and renders"},
      {"checkpoint", "<out_dir>/checkpoint.bin", "checkpoint file path"},
  };
}

void apply_key(RunConfig& c, const std::string& key, const json& v) {
  if (key == "n") c.n = as_int(v, key);
  else if (key == "modules") c.modules = as_int(v, key);
  else if (key == "per_class") c.per_class = as_int(v, key);
  else if (key == "classes") c.classes = as_int(v, key);
  else if (key == "noise_std") c.noise_std = as_double(v, key);
  else if (key == "alpha") c.alpha = as_double(v, key);
  else if (key == "beta") c.beta = as_double(v, key);
  else if (key == "seed") c.seed = as_u64(v, key);
  else if (key == "epochs") c.epochs = as_int(v, key);
  else if (key == "lr") c.lr = as_double(v, key);
  else if (key == "weight_decay") c.weight_decay = as_double(v, key);
  else if (key == "batch_size") c.batch_size = as_int(v, key);
  else if (key == "w1") c.w1 = as_int(v, key);
  else if (key == "w2") c.w2 = as_int(v, key);
  else if (key == "replay_buffer_size") c.replay_buffer_size = as_int(v, key);
  else if (key == "replay_enabled") c.replay_enabled = as_bool(v, key);
  else if (key == "checkpoint_every") c.checkpoint_every = as_int(v, key);
  else if (key == "adv_weight") c.adv_weight = as_double(v, key);
  else if (key == "cyc_weight") c.cyc_weight = as_double(v, key);
  else if (key == "id_weight") c.id_weight = as_double(v, key);
  else if (key == "sp_weight") c.sp_weight = as_double(v, key);
  else if (key == "sp_enabled") c.sp_enabled = as_bool(v, key);
  else if (key == "sp_pairing") c.sp_pairing = as_string(v, key);
  else if (key == "pcc_row_sum") c.pcc_row_sum = as_bool(v, key);
  else if (key == "fc_tau") c.fc_tau = as_double(v, key);
  else if (key == "sc_tau") c.sc_tau = as_double(v, key);
  else if (key == "top") c.top = as_double(v, key);
  else if (key == "threads") c.threads = as_int(v, key);
  else if (key == "data_dir") c.data_dir = as_string(v, key);
  else if (key == "out_dir") c.out_dir = as_string(v, key);
  else if (key == "checkpoint") c.checkpoint = as_string(v, key);
  else throw ValidationError("unknown config key '" + key + "'");
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("config " + path + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ValidationError("config root must be a JSON object");

  RunConfig cfg;
  for (const auto& [key, value] : j.items()) apply_key(cfg, key, value);
  validate_run_config(cfg);
  return cfg;
}

void validate_run_config(const RunConfig& cfg) {
  if (cfg.threads < 1) throw ValidationError("threads must be at least 1");
  if (!(cfg.top >= 0.0) || cfg.top > 1.0)
    throw ValidationError("top must be in [0, 1]");
  if (cfg.fc_tau < 0.0 || cfg.sc_tau < 0.0)
    throw ValidationError("thresholds must be non-negative");
  parse_sp_pairing(cfg.sp_pairing);
  if (cfg.data_dir.empty() || cfg.out_dir.empty())
    throw ValidationError("data_dir and out_dir must be non-empty");
}

std::string run_config_help() {
  std::ostringstream out;
  out << "Config file keys (flat JSON object; every key optional, unknown keys rejected):\n";
  for (const auto& d : key_docs()) {
    out << "  " << d.key;
    for (size_t i = std::char_traits<char>::length(d.key); i < 20; ++i) out << ' ';
    out << "default " << d.def;
    for (size_t i = d.def.size(); i < 26; ++i) out << ' ';
    out << d.doc << "\n";
  }
  return out.str();
}

SpPairing parse_sp_pairing(const std::string& s) {
  if (s == "literal") return SpPairing::literal;
  if (s == "paired") return SpPairing::paired;
  throw ValidationError("sp_pairing must be 'literal' or 'paired', got '" + s + "'");
}

TrainConfig train_config(const RunConfig& cfg) {
  TrainConfig t;
  t.epochs = cfg.epochs;
  t.lr = cfg.lr;
  t.weight_decay = cfg.weight_decay;
  t.batch_size = cfg.batch_size;
  t.seed = cfg.seed;
  t.w1 = cfg.w1;
  t.w2 = cfg.w2;
  t.replay_buffer_size = cfg.replay_buffer_size;
  t.replay_enabled = cfg.replay_enabled;
  t.checkpoint_every = cfg.checkpoint_every;
  t.checkpoint_path = checkpoint_file(cfg);
  t.weights.adv = cfg.adv_weight;
  t.weights.cyc = cfg.cyc_weight;
  t.weights.id = cfg.id_weight;
  t.weights.sp = cfg.sp_weight;
  t.weights.sp_enabled = cfg.sp_enabled;
  t.weights.sp_pairing = parse_sp_pairing(cfg.sp_pairing);
  t.weights.pcc_row_sum = cfg.pcc_row_sum;
  return t;
}

SynthConfig synth_config(const RunConfig& cfg) {
  SynthConfig s;
  s.n = cfg.n;
  s.modules = cfg.modules;
  s.per_class = cfg.per_class;
  s.classes = cfg.classes;
  s.noise_std = cfg.noise_std;
  s.alpha = cfg.alpha;
  s.beta = cfg.beta;
  s.seed = cfg.seed;
  return s;
}

EvalThresholds eval_thresholds(const RunConfig& cfg) {
  return {ThresholdMode::abs_tau(cfg.fc_tau), ThresholdMode::abs_tau(cfg.sc_tau)};
}

std::string manifest_path(const RunConfig& cfg) {
  return (std::filesystem::path(cfg.data_dir) / "manifest.json").string();
}

std::string checkpoint_file(const RunConfig& cfg) {
  if (!cfg.checkpoint.empty()) return cfg.checkpoint;
  return (std::filesystem::path(cfg.out_dir) / "checkpoint.bin").string();
}

}  // namespace sfcgan
