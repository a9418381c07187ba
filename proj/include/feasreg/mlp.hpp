#pragma once

#include <string>
#include <vector>

#include "feasreg/common.hpp"

namespace feasreg {

/// Fully-connected net, ReLU hidden layers, identity output.
/// A fixed (untrained) affine input transform keeps the hidden layers
/// well-conditioned for raw state inputs.
struct Mlp {
  std::vector<int> sizes;  // [in, h1, ..., out]
  std::vector<std::vector<double>> W;  // W[l]: sizes[l+1] x sizes[l], row-major
  std::vector<std::vector<double>> b;
  std::vector<double> in_offset, in_scale;

  static Mlp make(const std::vector<int>& sizes, Rng& rng);

  int input_dim() const { return sizes.front(); }
  int output_dim() const { return sizes.back(); }
  std::size_t param_count() const;

  void forward(const double* in, double* out) const;
};

/// Per-parameter buffers with the same shapes as an Mlp.
struct MlpGrads {
  std::vector<std::vector<double>> W, b;
  explicit MlpGrads(const Mlp& net);
  void zero();
  void axpy(double s, const MlpGrads& other);
};

/// Forward pass that keeps activations for backprop.
struct MlpTape {
  std::vector<std::vector<double>> act;  // act[0] = scaled input, act[L] = output
  std::vector<std::vector<double>> pre;  // pre-activations per hidden/output layer
};

void mlp_forward_tape(const Mlp& net, const double* in, MlpTape& tape);

/// Backprop of dLoss/dOut through the tape; accumulates parameter gradients
/// and optionally returns dLoss/dIn (in original input units).
void mlp_backward(const Mlp& net, const MlpTape& tape, const double* dout, MlpGrads* grads,
                  double* din);

/// Gradient of output[j] w.r.t. the input (row of the Jacobian).
void mlp_input_grad(const Mlp& net, const double* in, int j, double* din);

struct Adam {
  double lr = 1e-4, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long t = 0;
  std::vector<std::vector<double>> mW, vW, mb, vb;
  explicit Adam(const Mlp& net, double lr_);
  void update(Mlp& net, const MlpGrads& g);
};

// --- policy head squashing: u = mid + half * tanh(z), always inside the box ---

void squash_action(const double* z, const Vec& lower, const Vec& upper, int m, double* u);
// d u_a / d z_a
void squash_jac(const double* z, const Vec& lower, const Vec& upper, int m, double* dudz);

// --- checkpoint serialization (flat binary, documented in README) ---

struct Checkpoint {
  long iteration = 0;
  uint64_t seed = 0;
  Mlp policy;
  Mlp value;
  std::vector<Mlp> extra;  // optional feasibility-field net
};

void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace feasreg
