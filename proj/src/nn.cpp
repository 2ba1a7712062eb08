#include "sfcgan/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace sfcgan::nn {

using kern::backend;

namespace {

/// Per-thread im2col workspace. Conv nodes run one at a time within a tape
/// and every user overwrites or re-zeroes the prefix it needs, so reuse is
/// safe and skips a multi-megabyte allocation per node.
double* col_scratch(size_t need) {
  thread_local std::vector<double> buf;
  if (buf.size() < need) buf.resize(need);
  return buf.data();
}

}  // namespace

Var Tape::push(Tensor val, std::function<void(Tape&)> bwd) {
  Node n;
  n.grad = Tensor(val.shape);
  n.val = std::move(val);
  n.bwd = std::move(bwd);
  nodes_.push_back(std::move(n));
  return Var{int(nodes_.size()) - 1};
}

Var Tape::leaf(Tensor t) { return push(std::move(t), {}); }

Var Tape::param_leaf(const Tensor& value, Tensor& grad_sink) {
  if (!value.same_shape(grad_sink))
    throw ValidationError("param gradient sink shape mismatch");
  Var v = push(value, {});
  Tensor* sink = &grad_sink;
  nodes_.back().bwd = [v, sink](Tape& t) {
    const Tensor& g = t.nodes_[size_t(v.id)].grad;
    backend().axpy(g.numel(), 1.0, g.ptr(), sink->ptr());
  };
  return v;
}

const Tensor& Tape::val(Var v) const {
  if (v.id < 0 || size_t(v.id) >= nodes_.size())
    throw ValidationError("invalid tape handle");
  return nodes_[size_t(v.id)].val;
}

Tensor& Tape::grad(Var v) {
  if (v.id < 0 || size_t(v.id) >= nodes_.size())
    throw ValidationError("invalid tape handle");
  return nodes_[size_t(v.id)].grad;
}

Var Tape::conv2d(Var xv, Var wv, int stride, int pad) {
  const Tensor& x = val(xv);
  const Tensor& w = val(wv);
  if (x.rank() != 4 || w.rank() != 4) throw ValidationError("conv2d expects 4-D tensors");
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int O = w.dim(0), K = w.dim(2);
  if (w.dim(1) != C) throw ValidationError("conv2d channel mismatch");
  if (w.dim(3) != K || K % 2 == 0) throw ValidationError("conv2d kernel must be square and odd");
  if (stride < 1 || pad < 0) throw ValidationError("conv2d invalid stride/pad");
  const int OH = kern::conv_out_size(H, K, stride, pad);
  const int OW = kern::conv_out_size(W, K, stride, pad);
  if (OH <= 0 || OW <= 0) throw ValidationError("conv2d nonpositive output size");

  const int ckk = C * K * K;
  const size_t in_plane = size_t(C) * H * W, out_plane = size_t(O) * OH * OW;
  Tensor out({B, O, OH, OW});
  {
    const size_t csz = size_t(ckk) * OH * OW;
    double* col = col_scratch(csz);
    for (int b = 0; b < B; ++b) {
      kern::im2col(x.ptr() + size_t(b) * in_plane, C, H, W, K, stride, pad, col);
      backend().gemm_nn(O, OH * OW, ckk, w.ptr(), col,
                        out.ptr() + size_t(b) * out_plane);
    }
  }
  Var v = push(std::move(out), {});
  nodes_.back().bwd = [=](Tape& t) {
    const Tensor& go = t.nodes_[size_t(v.id)].grad;
    const Tensor& xin = t.val(xv);
    const Tensor& ker = t.val(wv);
    Tensor& gx = t.grad(xv);
    Tensor& gw = t.grad(wv);
    const size_t csz = size_t(ckk) * OH * OW;
    double* col = col_scratch(csz);
    for (int b = 0; b < B; ++b) {
      std::fill(col, col + csz, 0.0);
      backend().gemm_tn(ckk, OH * OW, O, ker.ptr(), go.ptr() + size_t(b) * out_plane,
                        col);
      kern::col2im_add(col, C, H, W, K, stride, pad, gx.ptr() + size_t(b) * in_plane);
      kern::im2col(xin.ptr() + size_t(b) * in_plane, C, H, W, K, stride, pad, col);
      backend().gemm_nt(O, ckk, OH * OW, go.ptr() + size_t(b) * out_plane, col,
                        gw.ptr());
    }
  };
  return v;
}

Var Tape::conv_transpose2d(Var xv, Var wv, int stride, int pad) {
  const Tensor& x = val(xv);
  const Tensor& w = val(wv);
  if (x.rank() != 4 || w.rank() != 4)
    throw ValidationError("conv_transpose2d expects 4-D tensors");
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Co = w.dim(1), K = w.dim(2);
  if (w.dim(0) != C) throw ValidationError("conv_transpose2d channel mismatch");
  if (w.dim(3) != K) throw ValidationError("conv_transpose2d kernel must be square");
  if (stride < 1 || pad < 0) throw ValidationError("conv_transpose2d invalid stride/pad");
  const int OH = (H - 1) * stride - 2 * pad + K;
  const int OW = (W - 1) * stride - 2 * pad + K;
  if (OH <= 0 || OW <= 0) throw ValidationError("conv_transpose2d nonpositive output size");

  const int ckk = Co * K * K;
  const size_t in_plane = size_t(C) * H * W, out_plane = size_t(Co) * OH * OW;
  Tensor out({B, Co, OH, OW});
  {
    const size_t csz = size_t(ckk) * H * W;
    double* col = col_scratch(csz);
    for (int b = 0; b < B; ++b) {
      std::fill(col, col + csz, 0.0);
      backend().gemm_tn(ckk, H * W, C, w.ptr(), x.ptr() + size_t(b) * in_plane, col);
      kern::col2im_add(col, Co, OH, OW, K, stride, pad,
                       out.ptr() + size_t(b) * out_plane);
    }
  }
  Var v = push(std::move(out), {});
  nodes_.back().bwd = [=](Tape& t) {
    const Tensor& go = t.nodes_[size_t(v.id)].grad;
    const Tensor& xin = t.val(xv);
    const Tensor& ker = t.val(wv);
    Tensor& gx = t.grad(xv);
    Tensor& gw = t.grad(wv);
    const size_t csz = size_t(ckk) * H * W;
    double* col = col_scratch(csz);
    for (int b = 0; b < B; ++b) {
      kern::im2col(go.ptr() + size_t(b) * out_plane, Co, OH, OW, K, stride, pad, col);
      backend().gemm_nn(C, H * W, ckk, ker.ptr(), col,
                        gx.ptr() + size_t(b) * in_plane);
      backend().gemm_nt(C, ckk, H * W, xin.ptr() + size_t(b) * in_plane, col, gw.ptr());
    }
  };
  return v;
}

Var Tape::dense(Var xv, Var wv, Var bv) {
  const Tensor& x = val(xv);
  const Tensor& w = val(wv);
  const Tensor& b = val(bv);
  if (x.rank() != 2 || w.rank() != 2 || b.rank() != 1)
    throw ValidationError("dense expects x[B,F], w[F,G], b[G]");
  const int B = x.dim(0), F = x.dim(1), G = w.dim(1);
  if (w.dim(0) != F || b.dim(0) != G) throw ValidationError("dense shape mismatch");

  Tensor out({B, G});
  for (int r = 0; r < B; ++r)
    std::memcpy(out.ptr() + size_t(r) * G, b.ptr(), size_t(G) * sizeof(double));
  backend().gemm_nn(B, G, F, x.ptr(), w.ptr(), out.ptr());

  Var v = push(std::move(out), {});
  nodes_.back().bwd = [=](Tape& t) {
    const Tensor& go = t.nodes_[size_t(v.id)].grad;
    const Tensor& xin = t.val(xv);
    const Tensor& wt = t.val(wv);
    backend().gemm_nt(B, F, G, go.ptr(), wt.ptr(), t.grad(xv).ptr());
    backend().gemm_tn(F, G, B, xin.ptr(), go.ptr(), t.grad(wv).ptr());
    Tensor& gb = t.grad(bv);
    for (int r = 0; r < B; ++r)
      backend().axpy(G, 1.0, go.ptr() + size_t(r) * G, gb.ptr());
  };
  return v;
}

Var Tape::bias_channel(Var xv, Var bv) {
  const Tensor& x = val(xv);
  const Tensor& b = val(bv);
  if (x.rank() != 4 || b.rank() != 1 || b.dim(0) != x.dim(1))
    throw ValidationError("bias_channel expects x[B,C,H,W], b[C]");
  const int B = x.dim(0), C = x.dim(1);
  const int64_t HW = int64_t(x.dim(2)) * x.dim(3);
  Tensor out = x;
  for (int n = 0; n < B; ++n)
    for (int c = 0; c < C; ++c) {
      double* dst = out.ptr() + (size_t(n) * C + c) * HW;
      const double bc = b.data[size_t(c)];
      for (int64_t i = 0; i < HW; ++i) dst[i] += bc;
    }
  Var v = push(std::move(out), {});
  nodes_.back().bwd = [=](Tape& t) {
    const Tensor& go = t.nodes_[size_t(v.id)].grad;
    backend().axpy(go.numel(), 1.0, go.ptr(), t.grad(xv).ptr());
    Tensor& gb = t.grad(bv);
    for (int n = 0; n < B; ++n)
      for (int c = 0; c < C; ++c)
        gb.data[size_t(c)] += backend().sum(HW, go.ptr() + (size_t(n) * C + c) * HW);
  };
  return v;
}

void Tape::note_sign_pattern(const double* v, int64_t n) {
  if (!track_act_signs) return;
  uint64_t h = 1469598103934665603ull;
  for (int64_t i = 0; i < n; ++i) {
    h ^= uint64_t(v[i] > 0.0) + 0x9e3779b97f4a7c15ull;
    h *= 1099511628211ull;
  }
  act_sign_hashes.push_back(h);
}

Var Tape::act(Var xv, Act kind) {
  const Tensor& x = val(xv);
  if (kind == Act::relu || kind == Act::leaky_relu)
    note_sign_pattern(x.ptr(), x.numel());
  Tensor out(x.shape);
  backend().act_fwd(kind, x.numel(), x.ptr(), out.ptr());
  Var v = push(std::move(out), {});
  nodes_.back().bwd = [=](Tape& t) {
    const Node& self = t.nodes_[size_t(v.id)];
    backend().act_bwd(kind, self.val.numel(), self.val.ptr(), self.grad.ptr(),
                      t.grad(xv).ptr());
  };
  return v;
}

Var Tape::symmetrize_hw(Var xv) {
  const Tensor& x = val(xv);
  if (x.rank() != 4 || x.dim(2) != x.dim(3))
    throw ValidationError("symmetrize_hw expects square trailing dims");
  const int BC = x.dim(0) * x.dim(1), n = x.dim(2);
  Tensor out(x.shape);
  for (int p = 0; p < BC; ++p) {
    const double* src = x.ptr() + size_t(p) * n * n;
    double* dst = out.ptr() + size_t(p) * n * n;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        dst[size_t(i) * n + j] = 0.5 * (src[size_t(i) * n + j] + src[size_t(j) * n + i]);
  }
  Var v = push(std::move(out), {});
  nodes_.back().bwd = [=](Tape& t) {
    const Tensor& go = t.nodes_[size_t(v.id)].grad;
    Tensor& gx = t.grad(xv);
    for (int p = 0; p < BC; ++p) {
      const double* g = go.ptr() + size_t(p) * n * n;
      double* dst = gx.ptr() + size_t(p) * n * n;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          dst[size_t(i) * n + j] += 0.5 * (g[size_t(i) * n + j] + g[size_t(j) * n + i]);
    }
  };
  return v;
}

Var Tape::set_diag_const(Var xv, double value) {
  const Tensor& x = val(xv);
  if (x.rank() != 4 || x.dim(2) != x.dim(3))
    throw ValidationError("set_diag_const expects square trailing dims");
  const int BC = x.dim(0) * x.dim(1), n = x.dim(2);
  Tensor out = x;
  for (int p = 0; p < BC; ++p) {
    double* dst = out.ptr() + size_t(p) * n * n;
    for (int i = 0; i < n; ++i) dst[size_t(i) * n + i] = value;
  }
  Var v = push(std::move(out), {});
  nodes_.back().bwd = [=](Tape& t) {
    const Tensor& go = t.nodes_[size_t(v.id)].grad;
    Tensor& gx = t.grad(xv);
    for (int p = 0; p < BC; ++p) {
      const double* g = go.ptr() + size_t(p) * n * n;
      double* dst = gx.ptr() + size_t(p) * n * n;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          if (i != j) dst[size_t(i) * n + j] += g[size_t(i) * n + j];
    }
  };
  return v;
}

Var Tape::crop2d(Var xv, int out_h, int out_w) {
  const Tensor& x = val(xv);
  if (x.rank() != 4) throw ValidationError("crop2d expects a 4-D tensor");
  const int BC = x.dim(0) * x.dim(1), H = x.dim(2), W = x.dim(3);
  if (out_h < 1 || out_h > H || out_w < 1 || out_w > W)
    throw ValidationError("crop2d size out of range");
  Tensor out({x.dim(0), x.dim(1), out_h, out_w});
  for (int p = 0; p < BC; ++p)
    for (int i = 0; i < out_h; ++i)
      std::memcpy(out.ptr() + (size_t(p) * out_h + i) * out_w,
                  x.ptr() + (size_t(p) * H + i) * W, size_t(out_w) * sizeof(double));
  Var v = push(std::move(out), {});
  nodes_.back().bwd = [=](Tape& t) {
    const Tensor& go = t.nodes_[size_t(v.id)].grad;
    Tensor& gx = t.grad(xv);
    for (int p = 0; p < BC; ++p)
      for (int i = 0; i < out_h; ++i)
        backend().axpy(out_w, 1.0, go.ptr() + (size_t(p) * out_h + i) * out_w,
                       gx.ptr() + (size_t(p) * H + i) * W);
  };
  return v;
}

Var Tape::reshape(Var xv, std::vector<int> shape) {
  const Tensor& x = val(xv);
  if (Tensor::numel_of(shape) != x.numel()) throw ValidationError("reshape numel mismatch");
  Tensor out;
  out.shape = std::move(shape);
  out.data = x.data;
  Var v = push(std::move(out), {});
  nodes_.back().bwd = [=](Tape& t) {
    const Tensor& go = t.nodes_[size_t(v.id)].grad;
    backend().axpy(go.numel(), 1.0, go.ptr(), t.grad(xv).ptr());
  };
  return v;
}

Var Tape::add(Var av, Var bv) {
  const Tensor& a = val(av);
  const Tensor& b = val(bv);
  if (!a.same_shape(b)) throw ValidationError("add shape mismatch");
  Tensor out = a;
  backend().axpy(out.numel(), 1.0, b.ptr(), out.ptr());
  Var v = push(std::move(out), {});
  nodes_.back().bwd = [=](Tape& t) {
    const Tensor& go = t.nodes_[size_t(v.id)].grad;
    backend().axpy(go.numel(), 1.0, go.ptr(), t.grad(av).ptr());
    backend().axpy(go.numel(), 1.0, go.ptr(), t.grad(bv).ptr());
  };
  return v;
}

Var Tape::sub(Var av, Var bv) {
  const Tensor& a = val(av);
  const Tensor& b = val(bv);
  if (!a.same_shape(b)) throw ValidationError("sub shape mismatch");
  Tensor out = a;
  backend().axpy(out.numel(), -1.0, b.ptr(), out.ptr());
  Var v = push(std::move(out), {});
  nodes_.back().bwd = [=](Tape& t) {
    const Tensor& go = t.nodes_[size_t(v.id)].grad;
    backend().axpy(go.numel(), 1.0, go.ptr(), t.grad(av).ptr());
    backend().axpy(go.numel(), -1.0, go.ptr(), t.grad(bv).ptr());
  };
  return v;
}

Var Tape::scale(Var av, double s) {
  Tensor out = val(av);
  backend().scale(out.numel(), s, out.ptr());
  Var v = push(std::move(out), {});
  nodes_.back().bwd = [=](Tape& t) {
    const Tensor& go = t.nodes_[size_t(v.id)].grad;
    backend().axpy(go.numel(), s, go.ptr(), t.grad(av).ptr());
  };
  return v;
}

Var Tape::square(Var av) {
  const Tensor& a = val(av);
  Tensor out(a.shape);
  for (int64_t i = 0; i < a.numel(); ++i) out.data[size_t(i)] = a.data[size_t(i)] * a.data[size_t(i)];
  Var v = push(std::move(out), {});
  nodes_.back().bwd = [=](Tape& t) {
    const Tensor& go = t.nodes_[size_t(v.id)].grad;
    const Tensor& ain = t.val(av);
    Tensor& ga = t.grad(av);
    for (int64_t i = 0; i < go.numel(); ++i)
      ga.data[size_t(i)] += 2.0 * ain.data[size_t(i)] * go.data[size_t(i)];
  };
  return v;
}

Var Tape::sum_all(Var av) {
  const Tensor& a = val(av);
  Tensor out({1});
  out.data[0] = backend().sum(a.numel(), a.ptr());
  Var v = push(std::move(out), {});
  nodes_.back().bwd = [=](Tape& t) {
    const double g = t.nodes_[size_t(v.id)].grad.data[0];
    Tensor& ga = t.grad(av);
    for (int64_t i = 0; i < ga.numel(); ++i) ga.data[size_t(i)] += g;
  };
  return v;
}

Var Tape::wsum(const std::vector<std::pair<double, Var>>& terms) {
  double total = 0.0;
  for (const auto& [w, tv] : terms) {
    if (val(tv).numel() != 1) throw ValidationError("wsum expects scalar terms");
    total += w * val(tv).data[0];
  }
  Tensor out({1});
  out.data[0] = total;
  Var v = push(std::move(out), {});
  auto captured = terms;
  nodes_.back().bwd = [v, captured](Tape& t) {
    const double g = t.nodes_[size_t(v.id)].grad.data[0];
    for (const auto& [w, tv] : captured) t.grad(tv).data[0] += w * g;
  };
  return v;
}

Var Tape::scalar_node(double value, std::function<void(Tape&, double)> bwd) {
  Tensor out({1});
  out.data[0] = value;
  Var v = push(std::move(out), {});
  auto fn = std::move(bwd);
  nodes_.back().bwd = [v, fn](Tape& t) { fn(t, t.nodes_[size_t(v.id)].grad.data[0]); };
  return v;
}

void Tape::backward(Var loss) {
  if (loss.id < 0 || size_t(loss.id) >= nodes_.size())
    throw ValidationError("invalid tape handle");
  if (nodes_[size_t(loss.id)].val.numel() != 1)
    throw ValidationError("backward requires a scalar loss");
  nodes_[size_t(loss.id)].grad.data[0] = 1.0;
  for (size_t i = nodes_.size(); i-- > 0;) {
    if (nodes_[i].bwd) nodes_[i].bwd(*this);
  }
}

ParamSet::Item& ParamSet::add(std::string name, Tensor t) {
  for (const Item& it : items)
    if (it.name == name) throw ValidationError("duplicate parameter name: " + name);
  Item it;
  it.name = std::move(name);
  it.grad = Tensor(t.shape);
  it.value = std::move(t);
  items.push_back(std::move(it));
  return items.back();
}

ParamSet::Item& ParamSet::at(std::string_view name) {
  for (Item& it : items)
    if (it.name == name) return it;
  throw ValidationError("unknown parameter: " + std::string(name));
}

const ParamSet::Item& ParamSet::at(std::string_view name) const {
  return const_cast<ParamSet*>(this)->at(name);
}

void ParamSet::zero_grad() {
  for (Item& it : items) it.grad.fill(0.0);
}

void ParamSet::quantize_f32_grid() {
  for (Item& it : items) it.value.quantize_f32_grid();
}

int64_t ParamSet::numel() const {
  int64_t n = 0;
  for (const Item& it : items) n += it.value.numel();
  return n;
}

void AdamState::init(std::span<ParamSet* const> groups) {
  slots.clear();
  t = 0;
  for (const ParamSet* ps : groups)
    for (const auto& it : ps->items)
      slots.push_back({Tensor(it.value.shape), Tensor(it.value.shape)});
}

void AdamState::quantize_f32_grid() {
  for (Moments& mo : slots) {
    mo.m.quantize_f32_grid();
    mo.v.quantize_f32_grid();
  }
}

void adam_step(std::span<ParamSet* const> groups, AdamState& st, double lr,
               double weight_decay) {
  if (lr <= 0.0) throw ValidationError("learning rate must be positive");
  size_t total = 0;
  for (const ParamSet* ps : groups) total += ps->items.size();
  if (st.slots.empty() && total > 0) st.init(groups);
  if (st.slots.size() != total) throw ValidationError("optimizer state does not match parameters");

  st.t += 1;
  const double bc1 = 1.0 - std::pow(st.beta1, double(st.t));
  const double bc2 = 1.0 - std::pow(st.beta2, double(st.t));
  size_t slot = 0;
  for (ParamSet* ps : groups) {
    for (auto& it : ps->items) {
      AdamState::Moments& mo = st.slots[slot++];
      if (!mo.m.same_shape(it.value))
        throw ValidationError("optimizer moment shape mismatch for " + it.name);
      kern::backend().adam_update(it.value.numel(), it.value.ptr(), it.grad.ptr(),
                                  mo.m.ptr(), mo.v.ptr(), lr, weight_decay, st.beta1,
                                  st.beta2, bc1, bc2, st.eps);
      it.grad.fill(0.0);
    }
  }
}

void adam_step(ParamSet& params, AdamState& st, double lr, double weight_decay) {
  ParamSet* groups[] = {&params};
  adam_step(groups, st, lr, weight_decay);
}

double grad_check(const std::function<Var(Tape&)>& build,
                  std::span<ParamSet* const> params, double eps, Rng& rng,
                  int samples_per_tensor) {
  for (ParamSet* ps : params) ps->zero_grad();
  std::vector<std::vector<Tensor>> analytic;
  {
    Tape tape;
    Var loss = build(tape);
    tape.backward(loss);
  }
  for (ParamSet* ps : params) {
    auto& grads = analytic.emplace_back();
    for (const auto& it : ps->items) grads.push_back(it.grad);
  }

  auto eval = [&](std::vector<uint64_t>& signs) {
    Tape tape;
    tape.track_act_signs = true;
    Var loss = build(tape);
    signs = std::move(tape.act_sign_hashes);
    return tape.val(loss).data[0];
  };

  double max_err = 0.0;
  std::vector<uint64_t> sp, sm;
  for (size_t g = 0; g < params.size(); ++g) {
    ParamSet& ps = *params[g];
    for (size_t i = 0; i < ps.items.size(); ++i) {
      Tensor& value = ps.items[i].value;
      const int64_t n = value.numel();
      const int64_t probes = std::min<int64_t>(n, samples_per_tensor);
      for (int64_t s = 0; s < probes; ++s) {
        int64_t idx = probes == n ? s : int64_t(rng.bounded(uint64_t(n)));
        double fd = 0.0;
        bool smooth = false;
        for (int attempt = 0; attempt < 64 && !smooth; ++attempt) {
          const double orig = value.data[size_t(idx)];
          value.data[size_t(idx)] = orig + eps;
          const double fp = eval(sp);
          value.data[size_t(idx)] = orig - eps;
          const double fm = eval(sm);
          value.data[size_t(idx)] = orig;
          fd = (fp - fm) / (2.0 * eps);
          smooth = sp == sm;
          if (!smooth) idx = int64_t(rng.bounded(uint64_t(n)));
        }
        if (!smooth) continue;
        const double an = analytic[g][i].data[size_t(idx)];
        const double denom = std::max({1e-8, std::fabs(an), std::fabs(fd)});
        max_err = std::max(max_err, std::fabs(an - fd) / denom);
      }
    }
  }
  for (ParamSet* ps : params) ps->zero_grad();
  return max_err;
}

}  // namespace sfcgan::nn
