#include "sfcgan/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace sfcgan {

namespace {

using nn::Tape;
using nn::Var;

constexpr double kProbClamp = 1e-7;

/// Pearson r with optional gradient accumulation: gx[k] += cx * dr/dx_k and
/// likewise for y. Variance below a tiny data-scaled floor makes the operand
/// effectively constant; such terms contribute r = 0 with zero gradient.
double pearson_acc(const double* x, const double* y, int64_t m, double cx,
                   double* gx, double cy, double* gy) {
  double mx = 0, my = 0, axx = 0, ayy = 0;
  for (int64_t i = 0; i < m; ++i) {
    mx += x[i];
    my += y[i];
    axx = std::max(axx, std::fabs(x[i]));
    ayy = std::max(ayy, std::fabs(y[i]));
  }
  mx /= double(m);
  my /= double(m);
  double sxx = 0, syy = 0, sxy = 0;
  for (int64_t i = 0; i < m; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  const double fx = 1e-12 * std::max(1.0, axx);
  const double fy = 1e-12 * std::max(1.0, ayy);
  if (sxx <= double(m) * fx * fx || syy <= double(m) * fy * fy) return 0.0;

  const double denom = std::sqrt(sxx * syy);
  const double r = sxy / denom;
  if (gx)
    for (int64_t i = 0; i < m; ++i)
      gx[i] += cx * ((y[i] - my) / denom - r * (x[i] - mx) / sxx);
  if (gy)
    for (int64_t i = 0; i < m; ++i)
      gy[i] += cy * ((x[i] - mx) / denom - r * (y[i] - my) / syy);
  return r;
}

/// pcc_loss for one matrix pair; when c != 0 accumulates c * dloss into the
/// gradient arrays.
double pcc_loss_acc(const double* x, const double* y, int n, bool row_sum,
                    double c, double* gx, double* gy) {
  const int64_t m = int64_t(n) * n;
  double loss = 1.0 - pearson_acc(x, y, m, -c, gx, -c, gy);
  const double rw = row_sum ? 1.0 : 1.0 / double(n);
  for (int i = 0; i < n; ++i) {
    const int64_t off = int64_t(i) * n;
    const double ri =
        pearson_acc(x + off, y + off, n, -c * rw, gx ? gx + off : nullptr,
                    -c * rw, gy ? gy + off : nullptr);
    loss += rw * (1.0 - ri);
  }
  return loss;
}

double clamp_p(double p) {
  return std::min(std::max(p, kProbClamp), 1.0 - kProbClamp);
}

double mean_abs_diff(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - b[i]);
  return s / double(a.size());
}

double mean_sq_diff(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / double(a.size());
}

/// Generator forward without the source-domain check: the identity term
/// feeds target-domain data on purpose.
Connectome apply_generator(GeneratorParams& g, const Connectome& x) {
  if (x.n != g.n) throw ValidationError("connectome size does not match model");
  Tape t;
  Var out = generator_forward(t, g, t.leaf(connectome_to_tensor(x)));
  Connectome y;
  y.n = x.n;
  y.domain = g.target_domain;
  y.values = t.val(out).data;
  return y;
}

void check_paired(const std::vector<Connectome>& a, const std::vector<Connectome>& b) {
  if (a.empty() || a.size() != b.size())
    throw ValidationError("loss needs nonempty paired batches of equal size");
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i].n != b[i].n) throw ValidationError("paired connectomes differ in size");
}

}  // namespace

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.empty())
    throw ValidationError("pearson needs equal-length nonempty inputs");
  return pearson_acc(x.data(), y.data(), int64_t(x.size()), 0, nullptr, 0, nullptr);
}

double pcc_loss(std::span<const double> x, std::span<const double> y, int n,
                bool row_sum) {
  if (n < 2) throw ValidationError("pcc_loss needs n >= 2");
  if (x.size() != y.size() || int64_t(x.size()) != int64_t(n) * n)
    throw ValidationError("pcc_loss shape mismatch");
  return pcc_loss_acc(x.data(), y.data(), n, row_sum, 0, nullptr, nullptr);
}

double gan_loss_discriminator(std::span<const double> d_real,
                              std::span<const double> d_fake) {
  if (d_real.empty() || d_fake.empty())
    throw ValidationError("empty probability batch");
  double lr = 0, lf = 0;
  for (double p : d_real) lr += std::log(clamp_p(p));
  for (double p : d_fake) lf += std::log(1.0 - clamp_p(p));
  return -lr / double(d_real.size()) - lf / double(d_fake.size());
}

double gan_loss_generator(std::span<const double> d_fake) {
  if (d_fake.empty()) throw ValidationError("empty probability batch");
  double l = 0;
  for (double p : d_fake) l += std::log(clamp_p(p));
  return -l / double(d_fake.size());
}

double cycle_loss(GeneratorParams& g_fc, GeneratorParams& g_sc,
                  const std::vector<Connectome>& x_fc,
                  const std::vector<Connectome>& x_sc) {
  check_paired(x_fc, x_sc);
  double acc = 0;
  for (size_t i = 0; i < x_fc.size(); ++i) {
    const Connectome sc_rec = translate(g_sc, translate(g_fc, x_sc[i]));
    acc += mean_abs_diff(sc_rec.values, x_sc[i].values);
    const Connectome fc_rec = translate(g_fc, translate(g_sc, x_fc[i]));
    acc += mean_abs_diff(fc_rec.values, x_fc[i].values);
  }
  return acc / double(x_fc.size());
}

double identity_loss(GeneratorParams& g_fc, GeneratorParams& g_sc,
                     const std::vector<Connectome>& x_fc,
                     const std::vector<Connectome>& x_sc) {
  check_paired(x_fc, x_sc);
  double acc = 0;
  for (size_t i = 0; i < x_fc.size(); ++i) {
    acc += mean_abs_diff(apply_generator(g_fc, x_fc[i]).values, x_fc[i].values);
    acc += mean_abs_diff(apply_generator(g_sc, x_sc[i]).values, x_sc[i].values);
  }
  return acc / double(x_fc.size());
}

SpTerms sp_loss(const Connectome& x_fc, const Connectome& x_sc,
                const Connectome& xt_fc, const Connectome& xt_sc,
                SpPairing pairing, bool pcc_row_sum) {
  const int n = x_fc.n;
  if (x_sc.n != n || xt_fc.n != n || xt_sc.n != n)
    throw ValidationError("sp_loss needs one subject's four matrices");
  SpTerms out;
  out.mse = mean_sq_diff(x_fc.values, xt_fc.values) +
            mean_sq_diff(x_sc.values, xt_sc.values);
  if (pairing == SpPairing::literal)
    out.pcc = pcc_loss(x_fc.values, xt_sc.values, n, pcc_row_sum) +
              pcc_loss(x_sc.values, xt_fc.values, n, pcc_row_sum);
  else
    out.pcc = pcc_loss(x_sc.values, xt_sc.values, n, pcc_row_sum) +
              pcc_loss(x_fc.values, xt_fc.values, n, pcc_row_sum);
  return out;
}

std::pair<double, double> total_objective(const LossComponents& c,
                                          const LossWeights& w) {
  if (w.adv < 0 || w.cyc < 0 || w.id < 0 || w.sp < 0)
    throw ValidationError("loss weights must be nonnegative");
  double gen = w.adv * c.gan_g + w.cyc * c.cyc + w.id * c.id;
  if (w.sp_enabled) gen += w.sp * (c.sp_mse + c.sp_pcc);
  return {gen, w.adv * c.gan_d};
}

Var gan_d_loss_node(Tape& t, Var d_real, Var d_fake) {
  const Tensor& r = t.val(d_real);
  const Tensor& f = t.val(d_fake);
  const double value = gan_loss_discriminator(r.data, f.data);
  const int64_t nr = r.numel(), nf = f.numel();
  return t.scalar_node(value, [=](Tape& tt, double g) {
    const Tensor& rv = tt.val(d_real);
    Tensor& gr = tt.grad(d_real);
    for (int64_t i = 0; i < nr; ++i) {
      const double p = rv.data[size_t(i)];
      if (p > kProbClamp && p < 1.0 - kProbClamp)
        gr.data[size_t(i)] -= g / (double(nr) * p);
    }
    const Tensor& fv = tt.val(d_fake);
    Tensor& gf = tt.grad(d_fake);
    for (int64_t i = 0; i < nf; ++i) {
      const double p = fv.data[size_t(i)];
      if (p > kProbClamp && p < 1.0 - kProbClamp)
        gf.data[size_t(i)] += g / (double(nf) * (1.0 - p));
    }
  });
}

Var gan_g_loss_node(Tape& t, Var d_fake) {
  const Tensor& f = t.val(d_fake);
  const double value = gan_loss_generator(f.data);
  const int64_t nf = f.numel();
  return t.scalar_node(value, [=](Tape& tt, double g) {
    const Tensor& fv = tt.val(d_fake);
    Tensor& gf = tt.grad(d_fake);
    for (int64_t i = 0; i < nf; ++i) {
      const double p = fv.data[size_t(i)];
      if (p > kProbClamp && p < 1.0 - kProbClamp)
        gf.data[size_t(i)] -= g / (double(nf) * p);
    }
  });
}

Var mean_l1_node(Tape& t, Var a, Var b) {
  const Tensor& av = t.val(a);
  const Tensor& bv = t.val(b);
  if (!av.same_shape(bv)) throw ValidationError("mean_l1 shape mismatch");
  const int64_t n = av.numel();
  double s = 0;
  if (t.track_act_signs) {
    std::vector<double> diff(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) diff[size_t(i)] = av.data[size_t(i)] - bv.data[size_t(i)];
    t.note_sign_pattern(diff.data(), n);
  }
  for (int64_t i = 0; i < n; ++i) s += std::fabs(av.data[size_t(i)] - bv.data[size_t(i)]);
  return t.scalar_node(s / double(n), [=](Tape& tt, double g) {
    const Tensor& x = tt.val(a);
    const Tensor& y = tt.val(b);
    Tensor& ga = tt.grad(a);
    Tensor& gb = tt.grad(b);
    for (int64_t i = 0; i < n; ++i) {
      const double d = x.data[size_t(i)] - y.data[size_t(i)];
      const double sg = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
      ga.data[size_t(i)] += g * sg / double(n);
      gb.data[size_t(i)] -= g * sg / double(n);
    }
  });
}

Var mse_node(Tape& t, Var a, Var b) {
  const Tensor& av = t.val(a);
  const Tensor& bv = t.val(b);
  if (!av.same_shape(bv)) throw ValidationError("mse shape mismatch");
  const int64_t n = av.numel();
  double s = 0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = av.data[size_t(i)] - bv.data[size_t(i)];
    s += d * d;
  }
  return t.scalar_node(s / double(n), [=](Tape& tt, double g) {
    const Tensor& x = tt.val(a);
    const Tensor& y = tt.val(b);
    Tensor& ga = tt.grad(a);
    Tensor& gb = tt.grad(b);
    for (int64_t i = 0; i < n; ++i) {
      const double d = x.data[size_t(i)] - y.data[size_t(i)];
      ga.data[size_t(i)] += g * 2.0 * d / double(n);
      gb.data[size_t(i)] -= g * 2.0 * d / double(n);
    }
  });
}

Var pcc_loss_node(Tape& t, Var x, Var y, bool row_sum) {
  const Tensor& xv = t.val(x);
  const Tensor& yv = t.val(y);
  if (!xv.same_shape(yv) || xv.rank() != 4 || xv.dim(1) != 1 ||
      xv.dim(2) != xv.dim(3) || xv.dim(2) < 2)
    throw ValidationError("pcc_loss_node expects matching [B,1,n,n] inputs");
  const int B = xv.dim(0), n = xv.dim(2);
  const int64_t m = int64_t(n) * n;
  double value = 0;
  for (int b = 0; b < B; ++b)
    value += pcc_loss_acc(xv.ptr() + b * m, yv.ptr() + b * m, n, row_sum, 0,
                          nullptr, nullptr);
  value /= double(B);
  return t.scalar_node(value, [=](Tape& tt, double g) {
    const Tensor& xx = tt.val(x);
    const Tensor& yy = tt.val(y);
    Tensor& gx = tt.grad(x);
    Tensor& gy = tt.grad(y);
    for (int b = 0; b < B; ++b)
      pcc_loss_acc(xx.ptr() + b * m, yy.ptr() + b * m, n, row_sum,
                   g / double(B), gx.ptr() + b * m, gy.ptr() + b * m);
  });
}

}  // namespace sfcgan
