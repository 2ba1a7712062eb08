#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sfcgan/losses.hpp"

namespace sfcgan {

struct TrainConfig {
  int epochs = 200;
  double lr = 1e-4;
  double weight_decay = 1e-4;
  int batch_size = 4;
  uint64_t seed = 0;
  int w1 = 16;
  int w2 = 32;
  int replay_buffer_size = 50;
  bool replay_enabled = true;
  LossWeights weights;
  /// When > 0, a checkpoint is written to checkpoint_path every this many
  /// epochs (and the path must be set).
  int checkpoint_every = 0;
  std::string checkpoint_path;
};

/// Fixed-capacity pool of past fakes, one per domain, used for discriminator
/// updates. Insertion overwrites the oldest entry once full; sampling is
/// uniform over current contents.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity);
  /// Installs serialized contents, truncating to capacity if needed.
  void adopt(std::vector<Tensor> stored, size_t stored_pos);
  void push(Tensor fake);
  const Tensor& sample(Rng& rng) const;
  size_t size() const { return items.size(); }

  std::vector<Tensor> items;
  size_t pos = 0;

 private:
  size_t capacity_;
};

struct TrainHistory {
  int first_epoch = 1;
  std::vector<LossReport> epochs;
};

/// CSV: epoch,gan_g,gan_d,cyc,id,sp_mse,sp_pcc,total.
void save_train_log(const TrainHistory& h, const std::string& path);

/// Trains fresh models on the manifest's train split. Deterministic for a
/// fixed seed: data order is reshuffled each epoch from a seed derived from
/// (cfg.seed, epoch), and parameters plus optimizer moments are kept on the
/// float32 grid so checkpoints round-trip bitwise.
std::pair<ModelCheckpoint, TrainHistory> train(const DatasetManifest& manifest,
                                               const TrainConfig& cfg);

/// Continues a run from a checkpoint up to cfg.epochs. Epoch seeding reuses
/// the seed stored in the checkpoint, so train(E) and
/// resume(train(E/2), ..., E) produce bitwise-identical results. Already at
/// or past cfg.epochs, returns the checkpoint unchanged.
std::pair<ModelCheckpoint, TrainHistory> resume(ModelCheckpoint ck,
                                                const DatasetManifest& manifest,
                                                const TrainConfig& cfg);

}  // namespace sfcgan
