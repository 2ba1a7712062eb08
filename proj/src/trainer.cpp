#include "sfcgan/trainer.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace sfcgan {

namespace {

using nn::Tape;
using nn::Var;

void validate_config(const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw ValidationError("epochs must be >= 1");
  if (cfg.batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (!(cfg.lr > 0)) throw ValidationError("lr must be > 0");
  if (cfg.weight_decay < 0) throw ValidationError("weight_decay must be >= 0");
  if (cfg.replay_enabled && cfg.replay_buffer_size < 1)
    throw ValidationError("replay_buffer_size must be >= 1");
  if (cfg.weights.adv < 0 || cfg.weights.cyc < 0 || cfg.weights.id < 0 ||
      cfg.weights.sp < 0)
    throw ValidationError("loss weights must be nonnegative");
  if (cfg.checkpoint_every > 0 && cfg.checkpoint_path.empty())
    throw ValidationError("checkpoint_every needs checkpoint_path");
}

void load_train_split(const DatasetManifest& m, std::vector<Connectome>& fc,
                      std::vector<Connectome>& sc) {
  for (const auto& s : m.subjects) {
    if (s.split != Split::train) continue;
    fc.push_back(load_connectome(s.fc_path, Domain::FC, m.n));
    sc.push_back(load_connectome(s.sc_path, Domain::SC, m.n));
    fc.back().subject_id = s.id;
    sc.back().subject_id = s.id;
    fc.back().label = s.label;
    sc.back().label = s.label;
  }
  if (fc.empty()) throw ValidationError("manifest has no train subjects");
}

Tensor pack_batch(const std::vector<Connectome>& xs, const std::vector<int>& order,
                  size_t lo, size_t hi) {
  const int n = xs[size_t(order[lo])].n;
  const int B = int(hi - lo);
  Tensor t({B, 1, n, n});
  for (int b = 0; b < B; ++b)
    std::memcpy(t.ptr() + size_t(b) * n * n,
                xs[size_t(order[lo + size_t(b)])].values.data(),
                size_t(n) * n * sizeof(double));
  return t;
}

void check_finite(double v, const char* term, int epoch, size_t iter) {
  if (std::isfinite(v)) return;
  throw NumericError("non-finite " + std::string(term) + " loss at epoch " +
                     std::to_string(epoch) + ", iteration " + std::to_string(iter));
}

/// Every generated matrix must leave the output stack symmetric, in range,
/// with the domain diagonal.
void check_fake(const Tensor& fakes, Domain dom, int epoch, size_t iter) {
  const int B = fakes.dim(0), n = fakes.dim(2);
  const double lo = dom == Domain::FC ? -1.0 : 0.0;
  const double dg = dom == Domain::FC ? 1.0 : 0.0;
  for (int b = 0; b < B; ++b) {
    const double* m = fakes.ptr() + size_t(b) * n * n;
    for (int i = 0; i < n; ++i) {
      if (m[size_t(i) * n + i] != dg) goto bad;
      for (int j = 0; j < n; ++j) {
        const double v = m[size_t(i) * n + j];
        if (!(v >= lo && v <= 1.0) || v != m[size_t(j) * n + i]) goto bad;
      }
    }
  }
  return;
bad:
  throw NumericError("generator output violated connectome invariants at epoch " +
                     std::to_string(epoch) + ", iteration " + std::to_string(iter));
}

Tensor slice_matrix(const Tensor& batch, int b) {
  const int n = batch.dim(2);
  Tensor t({n, n});
  std::memcpy(t.ptr(), batch.ptr() + size_t(b) * n * n, size_t(n) * n * sizeof(double));
  return t;
}

Tensor batch_from_pool(const ReplayBuffer& pool, int B, int n, Rng& rng) {
  Tensor t({B, 1, n, n});
  for (int b = 0; b < B; ++b) {
    const Tensor& s = pool.sample(rng);
    std::memcpy(t.ptr() + size_t(b) * n * n, s.ptr(), size_t(n) * n * sizeof(double));
  }
  return t;
}

struct EpochAccum {
  LossReport sum;
  size_t batches = 0;

  void add(const LossReport& r) {
    sum.gan_g += r.gan_g;
    sum.gan_d += r.gan_d;
    sum.cyc += r.cyc;
    sum.id += r.id;
    sum.sp_mse += r.sp_mse;
    sum.sp_pcc += r.sp_pcc;
    sum.total += r.total;
    ++batches;
  }
  LossReport mean() const {
    LossReport r = sum;
    const double k = 1.0 / double(batches);
    r.gan_g *= k;
    r.gan_d *= k;
    r.cyc *= k;
    r.id *= k;
    r.sp_mse *= k;
    r.sp_pcc *= k;
    r.total *= k;
    return r;
  }
};

void run_epochs(ModelCheckpoint& st, const std::vector<Connectome>& fc,
                const std::vector<Connectome>& sc, const TrainConfig& cfg,
                TrainHistory& hist) {
  Models& m = st.models;
  const int n = m.cfg.n;
  const LossWeights& w = st.weights;

  auto gen_group = m.generator_group();
  auto dis_group = m.discriminator_group();
  const std::span<nn::ParamSet* const> gen_span(gen_group);
  const std::span<nn::ParamSet* const> dis_span(dis_group);
  if (st.gen_opt.slots.empty()) st.gen_opt.init(gen_span);
  if (st.dis_opt.slots.empty()) st.dis_opt.init(dis_span);

  ReplayBuffer pool_fc(cfg.replay_buffer_size);
  ReplayBuffer pool_sc(cfg.replay_buffer_size);
  pool_fc.adopt(std::move(st.replay_fc), st.replay_pos_fc);
  pool_sc.adopt(std::move(st.replay_sc), st.replay_pos_sc);

  std::vector<int> order(fc.size());

  hist.first_epoch = st.epoch + 1;
  for (int epoch = st.epoch + 1; epoch <= cfg.epochs; ++epoch) {
    Rng rng(mix_seed(m.cfg.seed, uint64_t(epoch)));
    // The batch order must be a pure function of (seed, epoch) so resumed
    // runs replay it without the earlier epochs' shuffles.
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    EpochAccum acc;

    for (size_t lo = 0; lo < order.size(); lo += size_t(cfg.batch_size)) {
      const size_t hi = std::min(order.size(), lo + size_t(cfg.batch_size));
      const size_t iter = lo / size_t(cfg.batch_size) + 1;
      const int B = int(hi - lo);
      const Tensor x_fc = pack_batch(fc, order, lo, hi);
      const Tensor x_sc = pack_batch(sc, order, lo, hi);
      LossReport rep;

      // Fakes for the discriminator pass, detached from the generators.
      Tensor cur_fake_fc, cur_fake_sc;
      {
        Tape t;
        cur_fake_fc = t.val(generator_forward(t, m.g_fc, t.leaf(x_sc)));
        cur_fake_sc = t.val(generator_forward(t, m.g_sc, t.leaf(x_fc)));
      }
      check_fake(cur_fake_fc, Domain::FC, epoch, iter);
      check_fake(cur_fake_sc, Domain::SC, epoch, iter);

      Tensor d_fake_fc_in, d_fake_sc_in;
      if (cfg.replay_enabled) {
        for (int b = 0; b < B; ++b) {
          Tensor f = slice_matrix(cur_fake_fc, b);
          f.quantize_f32_grid();
          pool_fc.push(std::move(f));
          Tensor s = slice_matrix(cur_fake_sc, b);
          s.quantize_f32_grid();
          pool_sc.push(std::move(s));
        }
        d_fake_fc_in = batch_from_pool(pool_fc, B, n, rng);
        d_fake_sc_in = batch_from_pool(pool_sc, B, n, rng);
      } else {
        d_fake_fc_in = cur_fake_fc;
        d_fake_sc_in = cur_fake_sc;
      }

      {
        Tape t;
        Var gan_fc = gan_d_loss_node(t, discriminator_forward(t, m.d_fc, t.leaf(x_fc)),
                                     discriminator_forward(t, m.d_fc, t.leaf(d_fake_fc_in)));
        Var gan_sc = gan_d_loss_node(t, discriminator_forward(t, m.d_sc, t.leaf(x_sc)),
                                     discriminator_forward(t, m.d_sc, t.leaf(d_fake_sc_in)));
        rep.gan_d = t.val(gan_fc).data[0] + t.val(gan_sc).data[0];
        check_finite(rep.gan_d, "adversarial (discriminator)", epoch, iter);
        Var loss = t.wsum({{w.adv, gan_fc}, {w.adv, gan_sc}});
        t.backward(loss);
        nn::adam_step(dis_span, st.dis_opt, cfg.lr, cfg.weight_decay);
        for (auto* ps : dis_group) ps->quantize_f32_grid();
        st.dis_opt.quantize_f32_grid();
      }

      {
        Tape t;
        Var xf = t.leaf(x_fc);
        Var xs = t.leaf(x_sc);
        Var fake_fc = generator_forward(t, m.g_fc, xs);
        Var fake_sc = generator_forward(t, m.g_sc, xf);
        Var gan_g = t.add(gan_g_loss_node(t, discriminator_forward(t, m.d_fc, fake_fc)),
                          gan_g_loss_node(t, discriminator_forward(t, m.d_sc, fake_sc)));
        Var cyc = t.add(mean_l1_node(t, generator_forward(t, m.g_sc, fake_fc), xs),
                        mean_l1_node(t, generator_forward(t, m.g_fc, fake_sc), xf));
        Var idt = t.add(mean_l1_node(t, generator_forward(t, m.g_fc, xf), xf),
                        mean_l1_node(t, generator_forward(t, m.g_sc, xs), xs));
        rep.gan_g = t.val(gan_g).data[0];
        rep.cyc = t.val(cyc).data[0];
        rep.id = t.val(idt).data[0];
        check_finite(rep.gan_g, "adversarial (generator)", epoch, iter);
        check_finite(rep.cyc, "cycle", epoch, iter);
        check_finite(rep.id, "identity", epoch, iter);

        std::vector<std::pair<double, Var>> terms = {
            {w.adv, gan_g}, {w.cyc, cyc}, {w.id, idt}};
        if (w.sp_enabled) {
          Var sp_pcc, sp_mse;
          if (w.sp_pairing == SpPairing::literal)
            sp_pcc = t.add(pcc_loss_node(t, xf, fake_sc, w.pcc_row_sum),
                           pcc_loss_node(t, xs, fake_fc, w.pcc_row_sum));
          else
            sp_pcc = t.add(pcc_loss_node(t, xs, fake_sc, w.pcc_row_sum),
                           pcc_loss_node(t, xf, fake_fc, w.pcc_row_sum));
          sp_mse = t.add(mse_node(t, xf, fake_fc), mse_node(t, xs, fake_sc));
          rep.sp_pcc = t.val(sp_pcc).data[0];
          rep.sp_mse = t.val(sp_mse).data[0];
          check_finite(rep.sp_pcc, "structure-preserving correlation", epoch, iter);
          check_finite(rep.sp_mse, "structure-preserving mse", epoch, iter);
          terms.push_back({w.sp, sp_pcc});
          terms.push_back({w.sp, sp_mse});
        }
        Var loss = t.wsum(terms);
        rep.total = t.val(loss).data[0];
        check_finite(rep.total, "total", epoch, iter);
        t.backward(loss);
        nn::adam_step(gen_span, st.gen_opt, cfg.lr, cfg.weight_decay);
        for (auto* ps : gen_group) ps->quantize_f32_grid();
        st.gen_opt.quantize_f32_grid();
        // The generator pass backpropagates through the discriminators; those
        // gradients are not applied, so drop them before the next D update.
        for (auto* ps : dis_group) ps->zero_grad();
      }
      acc.add(rep);
    }

    hist.epochs.push_back(acc.mean());
    st.epoch = epoch;
    if (cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 &&
        epoch < cfg.epochs) {
      st.replay_fc = pool_fc.items;
      st.replay_pos_fc = pool_fc.pos;
      st.replay_sc = pool_sc.items;
      st.replay_pos_sc = pool_sc.pos;
      save_checkpoint(st, cfg.checkpoint_path);
    }
  }

  st.replay_fc = std::move(pool_fc.items);
  st.replay_pos_fc = pool_fc.pos;
  st.replay_sc = std::move(pool_sc.items);
  st.replay_pos_sc = pool_sc.pos;
}

}  // namespace

ReplayBuffer::ReplayBuffer(int capacity) : capacity_(size_t(std::max(1, capacity))) {}

void ReplayBuffer::adopt(std::vector<Tensor> stored, size_t stored_pos) {
  items = std::move(stored);
  if (items.size() > capacity_) items.resize(capacity_);
  pos = items.size() < capacity_ ? items.size() : stored_pos % capacity_;
}

void ReplayBuffer::push(Tensor fake) {
  if (items.size() < capacity_) {
    items.push_back(std::move(fake));
    pos = items.size() % capacity_;
  } else {
    items[pos] = std::move(fake);
    pos = (pos + 1) % capacity_;
  }
}

const Tensor& ReplayBuffer::sample(Rng& rng) const {
  if (items.empty()) throw ValidationError("sampling from an empty replay buffer");
  return items[size_t(rng.bounded(uint64_t(items.size())))];
}

void save_train_log(const TrainHistory& h, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write train log: " + path);
  out << "epoch,gan_g,gan_d,cyc,id,sp_mse,sp_pcc,total\n";
  for (size_t i = 0; i < h.epochs.size(); ++i) {
    const LossReport& r = h.epochs[i];
    out << (h.first_epoch + int(i)) << ',' << format_general(r.gan_g, 10) << ','
        << format_general(r.gan_d, 10) << ',' << format_general(r.cyc, 10) << ','
        << format_general(r.id, 10) << ',' << format_general(r.sp_mse, 10) << ','
        << format_general(r.sp_pcc, 10) << ',' << format_general(r.total, 10)
        << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

std::pair<ModelCheckpoint, TrainHistory> train(const DatasetManifest& manifest,
                                               const TrainConfig& cfg) {
  validate_config(cfg);
  std::vector<Connectome> fc, sc;
  load_train_split(manifest, fc, sc);

  ModelCheckpoint st;
  ModelConfig mc;
  mc.n = manifest.n;
  mc.w1 = cfg.w1;
  mc.w2 = cfg.w2;
  mc.seed = cfg.seed;
  st.models = init_models(mc);
  st.weights = cfg.weights;

  TrainHistory hist;
  run_epochs(st, fc, sc, cfg, hist);
  return {std::move(st), std::move(hist)};
}

std::pair<ModelCheckpoint, TrainHistory> resume(ModelCheckpoint ck,
                                                const DatasetManifest& manifest,
                                                const TrainConfig& cfg) {
  validate_config(cfg);
  if (ck.models.cfg.n != manifest.n)
    throw ValidationError("checkpoint was trained at n=" +
                          std::to_string(ck.models.cfg.n) + ", manifest has n=" +
                          std::to_string(manifest.n));
  if (ck.models.cfg.w1 != cfg.w1 || ck.models.cfg.w2 != cfg.w2)
    throw ValidationError("checkpoint channel widths do not match config");

  TrainHistory hist;
  hist.first_epoch = ck.epoch + 1;
  if (ck.epoch >= cfg.epochs) return {std::move(ck), std::move(hist)};

  std::vector<Connectome> fc, sc;
  load_train_split(manifest, fc, sc);
  ck.weights = cfg.weights;
  run_epochs(ck, fc, sc, cfg, hist);
  return {std::move(ck), std::move(hist)};
}

}  // namespace sfcgan
