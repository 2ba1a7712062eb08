#pragma once

#include <string>

#include "sfcgan/connectome.hpp"

namespace sfcgan {

/// Synthetic dataset shape. Class k uses modules+k communities, so the class
/// signal lives in SC block structure and reaches FC through the ground-truth
/// mapping.
struct SynthConfig {
  int n = 32;
  int modules = 2;
  int per_class = 50;
  int classes = 2;
  double noise_std = 0.02;
  double alpha = 1.0;
  double beta = 0.2;
  uint64_t seed = 0;
};

/// Stochastic-block-model SC: within-community fiber counts drawn from
/// U(60,100), between-community from U(0,8), log1p-normalized against the
/// fixed dataset ceiling 100. Deterministic per (cfg.seed, subject_seed).
Connectome gen_sc(const SynthConfig& cfg, uint64_t subject_seed);

/// The known SC->FC mapping: tanh(alpha * (S + beta * S*S / n)) plus
/// symmetric Gaussian noise, clamped to [-1,1] with unit diagonal. The 1/n
/// keeps the quadratic term on the same scale as S for any matrix size.
Connectome sc_to_fc_ground_truth(const Connectome& sc, double alpha, double beta,
                                 double noise_std, uint64_t noise_seed);

/// Writes per-subject FC/SC files plus manifest.json into out_dir, split
/// 80/20 train/test stratified by class. Regeneration with the same config
/// is byte-identical.
DatasetManifest gen_dataset(const SynthConfig& cfg, const std::string& out_dir);

}  // namespace sfcgan
