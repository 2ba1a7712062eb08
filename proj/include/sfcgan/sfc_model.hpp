#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sfcgan/connectome.hpp"
#include "sfcgan/nn.hpp"

namespace sfcgan {

using nn::Tensor;

enum class SpPairing { literal, paired };

struct LossWeights {
  double adv = 1.0;
  double cyc = 1.0;
  double id = 1.0;
  double sp = 1.0;
  bool sp_enabled = true;
  SpPairing sp_pairing = SpPairing::literal;
  /// When set, the row term of the correlation loss is the raw sum over rows
  /// instead of the row mean.
  bool pcc_row_sum = false;
};

struct ModelConfig {
  int n = 116;
  int w1 = 16;
  int w2 = 32;
  uint64_t seed = 0;
};

/// One translator network. target_domain FC means the generator maps SC
/// inputs to FC outputs, and vice versa. The output layer applies tanh (FC)
/// or sigmoid (SC), then exact symmetrization and the domain diagonal.
struct GeneratorParams {
  Domain target_domain = Domain::FC;
  int n = 0, w1 = 0, w2 = 0;
  nn::ParamSet params;

  Domain source_domain() const {
    return target_domain == Domain::FC ? Domain::SC : Domain::FC;
  }
};

struct DiscriminatorParams {
  Domain source_domain = Domain::FC;
  int n = 0, w1 = 0, w2 = 0;
  nn::ParamSet params;
};

struct Models {
  ModelConfig cfg;
  GeneratorParams g_fc;  // SC -> FC
  GeneratorParams g_sc;  // FC -> SC
  DiscriminatorParams d_fc;
  DiscriminatorParams d_sc;

  /// Canonical optimizer group orders, also the checkpoint tensor order.
  std::array<nn::ParamSet*, 2> generator_group() { return {&g_fc.params, &g_sc.params}; }
  std::array<nn::ParamSet*, 2> discriminator_group() { return {&d_fc.params, &d_sc.params}; }
};

/// Deterministic uniform fan-in initialization from cfg.seed; parameters are
/// snapped to the float32 grid so checkpoints reproduce them bitwise.
Models init_models(const ModelConfig& cfg);

/// Appends the full generator stack to the tape. x must be [B,1,n,n]; the
/// returned value is [B,1,n,n], exactly symmetric with the domain diagonal.
nn::Var generator_forward(nn::Tape& t, GeneratorParams& g, nn::Var x);

/// Appends the discriminator stack; returns per-example probabilities [B,1].
nn::Var discriminator_forward(nn::Tape& t, DiscriminatorParams& d, nn::Var x);

Connectome translate(GeneratorParams& g, const Connectome& x);
double discriminate(DiscriminatorParams& d, const Connectome& x);

Tensor connectome_to_tensor(const Connectome& c);

struct ModelCheckpoint {
  Models models;
  LossWeights weights;
  nn::AdamState gen_opt;
  nn::AdamState dis_opt;
  int epoch = 0;
  /// Fake-history pools ([n,n] each) with their ring-insertion cursors, so a
  /// resumed run replays discriminator inputs identically.
  std::vector<Tensor> replay_fc, replay_sc;
  size_t replay_pos_fc = 0, replay_pos_sc = 0;
};

inline constexpr uint16_t kCheckpointVersion = 1;

void save_checkpoint(const ModelCheckpoint& c, const std::string& path);
ModelCheckpoint load_checkpoint(const std::string& path);

}  // namespace sfcgan
