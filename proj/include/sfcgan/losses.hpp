#pragma once

#include <span>
#include <utility>
#include <vector>

#include "sfcgan/sfc_model.hpp"

namespace sfcgan {

/// Per-step loss values. gan_g and gan_d aggregate both translation
/// directions; total is the generator objective.
struct LossReport {
  double gan_g = 0, gan_d = 0, cyc = 0, id = 0, sp_mse = 0, sp_pcc = 0, total = 0;
};

struct LossComponents {
  double gan_g = 0, gan_d = 0, cyc = 0, id = 0, sp_mse = 0, sp_pcc = 0;
};

struct SpTerms {
  double mse = 0, pcc = 0;
};

/// Pearson correlation; 0 when either operand has (numerically) zero
/// variance.
double pearson(std::span<const double> x, std::span<const double> y);

/// Correlation dissimilarity between two n-by-n matrices: one term over all
/// entries plus row-wise terms, each mapped r -> 1-r. Row terms enter as the
/// row mean by default, or the raw row sum when row_sum is set.
double pcc_loss(std::span<const double> x, std::span<const double> y, int n,
                bool row_sum = false);

double gan_loss_discriminator(std::span<const double> d_real,
                              std::span<const double> d_fake);
double gan_loss_generator(std::span<const double> d_fake);

double cycle_loss(GeneratorParams& g_fc, GeneratorParams& g_sc,
                  const std::vector<Connectome>& x_fc,
                  const std::vector<Connectome>& x_sc);
double identity_loss(GeneratorParams& g_fc, GeneratorParams& g_sc,
                     const std::vector<Connectome>& x_fc,
                     const std::vector<Connectome>& x_sc);

/// Structure-preserving terms for one subject. literal pairing correlates
/// each source with its own cross-domain translation; paired correlates the
/// translation with the ground-truth target.
SpTerms sp_loss(const Connectome& x_fc, const Connectome& x_sc,
                const Connectome& xt_fc, const Connectome& xt_sc,
                SpPairing pairing, bool pcc_row_sum = false);

/// (generator_total, discriminator_total) under the given weights.
std::pair<double, double> total_objective(const LossComponents& c,
                                          const LossWeights& w);

/// Tape-level builders used by the trainer. Probability inputs are clamped
/// to [1e-7, 1-1e-7] before logs; clamped entries get zero gradient.
nn::Var gan_d_loss_node(nn::Tape& t, nn::Var d_real, nn::Var d_fake);
nn::Var gan_g_loss_node(nn::Tape& t, nn::Var d_fake);
nn::Var mean_l1_node(nn::Tape& t, nn::Var a, nn::Var b);
nn::Var mse_node(nn::Tape& t, nn::Var a, nn::Var b);
/// Batch mean of pcc_loss over [B,1,n,n] pairs.
nn::Var pcc_loss_node(nn::Tape& t, nn::Var x, nn::Var y, bool row_sum = false);

}  // namespace sfcgan
