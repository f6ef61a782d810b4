#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <vector>

#include "mgrl/rng.hpp"

namespace mgrl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Raised when a computation sees non-finite inputs or produces a non-finite
// result. Distinct from std::invalid_argument so callers can tell numerical
// blow-ups apart from plain misuse.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class OutputActivation : std::int32_t {
  kIdentity = 0,
  kBoundedBox = 1,  // tanh scaled to [box_low, box_high], strictly inside the box
};

// Fully connected network with ReLU hidden layers. Batches are (dim, count)
// matrices: one sample per column.
struct Mlp {
  std::vector<int> layer_sizes;
  std::vector<Matrix> weights;  // weights[l] has shape (layer_sizes[l+1], layer_sizes[l])
  std::vector<Vector> biases;
  OutputActivation output_activation = OutputActivation::kIdentity;
  Vector box_low, box_high;

  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  int layer_count() const { return static_cast<int>(weights.size()); }
};

// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero. Draw order is
// fixed (layer by layer, row-major within a layer) so a seed pins the result.
Mlp init_mlp(const std::vector<int>& layer_sizes, OutputActivation activation, Rng& rng);
Mlp init_mlp(const std::vector<int>& layer_sizes, const Vector& box_low, const Vector& box_high,
             Rng& rng);

Matrix forward(const Mlp& m, const Matrix& input);

struct ForwardCache {
  Matrix input;
  std::vector<Matrix> pre;   // pre-activations, one per layer
  std::vector<Matrix> post;  // post-activations; post.back() is the network output
  const Matrix& output() const { return post.back(); }
};

ForwardCache forward_cached(const Mlp& m, const Matrix& input);

struct GradientBundle {
  std::vector<Matrix> d_weights;
  std::vector<Vector> d_biases;

  void set_zero();
  void add_scaled(const GradientBundle& other, double scale);
};

GradientBundle zero_gradients(const Mlp& m);

// Backpropagates dL/d(output) through a cached forward pass. Returns parameter
// gradients; if input_grad is non-null it receives dL/d(input). Throws
// NumericalError when the incoming gradient is not finite.
GradientBundle backward(const Mlp& m, const ForwardCache& cache, const Matrix& output_grad,
                        Matrix* input_grad = nullptr);

// One step of L = mean over columns of ||f(input) - target||^2 with a constant
// target. Returns the loss and the parameter gradients.
struct LossGrad {
  double loss = 0.0;
  GradientBundle grads;
};
LossGrad mse_loss_backward(const Mlp& m, const Matrix& input, const Matrix& target);

struct AdamState {
  std::vector<Matrix> m_w, v_w;
  std::vector<Vector> m_b, v_b;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

AdamState make_adam_state(const Mlp& m);

// Adam with bias correction. Mutates the caller-owned model and state.
void adam_step(Mlp& m, const GradientBundle& grads, AdamState& state, double learning_rate);

// target <- coefficient * target + (1 - coefficient) * online
void polyak_update(Mlp& target, const Mlp& online, double coefficient);

// Central finite differences over every parameter against the supplied
// analytic gradients. Returns the maximum relative error
// |fd - analytic| / (|fd| + |analytic| + 1e-6).
double grad_check(const Mlp& m, const std::function<double(const Mlp&)>& loss,
                  const GradientBundle& analytic, double h);

// Binary checkpoint: magic "MGM1", layer sizes, activation, box bounds when
// bounded, then per layer the weight matrix (row-major) and bias, all little
// endian float64.
void save_mlp(const Mlp& m, const std::filesystem::path& path);
Mlp load_mlp(const std::filesystem::path& path);

bool all_finite(const Matrix& m);

}  // namespace mgrl
