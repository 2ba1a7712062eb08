#pragma once

#include <deque>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sfcgan/kernels.hpp"
#include "sfcgan/tensor.hpp"

namespace sfcgan::nn {

using kern::Act;

/// Handle to a node on a Tape.
struct Var {
  int id = -1;
};

/// Append-only reverse-mode tape. Each op records its output value and a
/// closure that scatters the output gradient back to its inputs. The graph
/// is rebuilt per training step; node storage is stable (deque-backed).
class Tape {
 public:
  Var leaf(Tensor t);
  /// Leaf whose gradient is accumulated into an external buffer during
  /// backward(). The value is copied; the sink must outlive the tape.
  Var param_leaf(const Tensor& value, Tensor& grad_sink);

  const Tensor& val(Var v) const;
  Tensor& grad(Var v);

  /// input BCHW, kernel [O][I][K][K], zero padding, odd K.
  Var conv2d(Var x, Var w, int stride, int pad);
  /// input BCHW, kernel [Cin][Cout][K][K]; adjoint of conv2d with the same
  /// kernel: output spatial size (H-1)*stride - 2*pad + K.
  Var conv_transpose2d(Var x, Var w, int stride, int pad);
  /// x [B,F], w [F,G], b [G].
  Var dense(Var x, Var w, Var b);
  /// x [B,C,H,W], b [C], broadcast add over the spatial dims.
  Var bias_channel(Var x, Var b);
  Var act(Var x, Act kind);
  /// (X + X^T)/2 over the trailing two dims (requires H == W).
  Var symmetrize_hw(Var x);
  /// Copies x, overwriting the trailing-dims diagonal with a constant.
  Var set_diag_const(Var x, double v);
  /// Top-left corner crop of the trailing two dims.
  Var crop2d(Var x, int out_h, int out_w);
  Var reshape(Var x, std::vector<int> shape);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var scale(Var a, double s);
  Var square(Var a);
  Var sum_all(Var a);
  /// Weighted sum of scalar nodes.
  Var wsum(const std::vector<std::pair<double, Var>>& terms);
  /// Custom scalar with a caller-supplied backward; bwd receives the
  /// upstream gradient and must accumulate into the inputs' grads itself.
  Var scalar_node(double value, std::function<void(Tape&, double)> bwd);

  /// Seeds d(loss)/d(loss) = 1 and runs all node closures in reverse order.
  void backward(Var loss);

  size_t size() const { return nodes_.size(); }

  /// When set, kinked ops (relu/leaky-relu, absolute values) record a hash
  /// of their sign pattern per node. grad_check uses this to reject
  /// finite-difference probes whose +/- evaluations straddle a kink, where
  /// central differences are not a valid derivative oracle.
  bool track_act_signs = false;
  std::vector<uint64_t> act_sign_hashes;
  void note_sign_pattern(const double* v, int64_t n);

 private:
  struct Node {
    Tensor val;
    Tensor grad;
    std::function<void(Tape&)> bwd;
  };
  std::deque<Node> nodes_;

  Var push(Tensor val, std::function<void(Tape&)> bwd);
};

/// Named parameter tensors with matching gradient accumulators. Insertion
/// order is the canonical iteration order everywhere (updates, checkpoints).
struct ParamSet {
  struct Item {
    std::string name;
    Tensor value;
    Tensor grad;
  };
  std::vector<Item> items;

  Item& add(std::string name, Tensor t);
  Item& at(std::string_view name);
  const Item& at(std::string_view name) const;
  void zero_grad();
  void quantize_f32_grid();
  int64_t numel() const;
};

struct AdamState {
  struct Moments {
    Tensor m, v;
  };
  std::vector<Moments> slots;
  int64_t t = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  /// Allocates zero moments matching the concatenated groups.
  void init(std::span<ParamSet* const> groups);
  void quantize_f32_grid();
};

/// One bias-corrected Adam step with decoupled weight decay over all items
/// of all groups (slot order = group order then item order). Gradients are
/// zeroed afterwards.
void adam_step(std::span<ParamSet* const> groups, AdamState& st, double lr,
               double weight_decay);
void adam_step(ParamSet& params, AdamState& st, double lr, double weight_decay);

/// Compares reverse-mode gradients of build()'s scalar output against central
/// finite differences on randomly sampled parameter coordinates. Returns the
/// max relative error (denominator floored at 1e-8).
double grad_check(const std::function<Var(Tape&)>& build,
                  std::span<ParamSet* const> params, double eps, Rng& rng,
                  int samples_per_tensor = 8);

}  // namespace sfcgan::nn
