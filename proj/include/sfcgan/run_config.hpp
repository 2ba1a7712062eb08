#pragma once

#include <string>

#include "sfcgan/eval.hpp"
#include "sfcgan/synth.hpp"
#include "sfcgan/trainer.hpp"

namespace sfcgan {

/// Everything the CLI can be told, one flat key space shared by every
/// subcommand. Loaded from a JSON object where unknown keys are errors, then
/// adjusted by command-line flags. Defaults live here; run_config_help()
/// renders them for --help.
struct RunConfig {
  // dataset generation
  int n = 32;
  int modules = 2;
  int per_class = 50;
  int classes = 2;
  double noise_std = 0.02;
  double alpha = 1.0;
  double beta = 0.2;
  // shared
  uint64_t seed = 0;
  // training
  int epochs = 200;
  double lr = 1e-4;
  double weight_decay = 1e-4;
  int batch_size = 4;
  int w1 = 16;
  int w2 = 32;
  int replay_buffer_size = 50;
  bool replay_enabled = true;
  int checkpoint_every = 0;
  double adv_weight = 1.0;
  double cyc_weight = 1.0;
  double id_weight = 1.0;
  double sp_weight = 1.0;
  bool sp_enabled = true;
  std::string sp_pairing = "literal";
  bool pcc_row_sum = false;
  // graph-metric thresholds
  double fc_tau = 0.2;
  double sc_tau = 0.01;
  // render
  double top = 0.05;
  // execution
  int threads = 1;
  // paths
  std::string data_dir = "data";
  std::string out_dir = "out";
  std::string checkpoint;
};

/// Reads a JSON config file. Missing keys keep their defaults; unknown keys
/// and type mismatches are ValidationErrors, unreadable files IoErrors.
RunConfig load_run_config(const std::string& path);

/// Cross-cutting range checks (threads, top, taus, sp_pairing). Module
/// configs are validated by the module that consumes them.
void validate_run_config(const RunConfig& cfg);

/// One line per config key with its default and meaning.
std::string run_config_help();

SpPairing parse_sp_pairing(const std::string& s);

TrainConfig train_config(const RunConfig& cfg);
SynthConfig synth_config(const RunConfig& cfg);
EvalThresholds eval_thresholds(const RunConfig& cfg);

/// data_dir/manifest.json
std::string manifest_path(const RunConfig& cfg);
/// cfg.checkpoint, or out_dir/checkpoint.bin when unset.
std::string checkpoint_file(const RunConfig& cfg);

}  // namespace sfcgan
