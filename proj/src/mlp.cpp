#include "mgrl/mlp.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace mgrl {

bool all_finite(const Matrix& m) { return m.allFinite(); }

static void check_layer_sizes(const std::vector<int>& sizes) {
  if (sizes.size() < 2) throw std::invalid_argument("mlp needs at least input and output layers");
  for (int s : sizes)
    if (s <= 0) throw std::invalid_argument("mlp layer sizes must be positive");
}

Mlp init_mlp(const std::vector<int>& layer_sizes, OutputActivation activation, Rng& rng) {
  check_layer_sizes(layer_sizes);
  Mlp m;
  m.layer_sizes = layer_sizes;
  m.output_activation = activation;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const int fan_in = layer_sizes[l];
    const int fan_out = layer_sizes[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Matrix w(fan_out, fan_in);
    for (int i = 0; i < fan_out; ++i)
      for (int j = 0; j < fan_in; ++j) w(i, j) = rng.uniform(-bound, bound);
    m.weights.push_back(std::move(w));
    m.biases.push_back(Vector::Zero(fan_out));
  }
  return m;
}

Mlp init_mlp(const std::vector<int>& layer_sizes, const Vector& box_low, const Vector& box_high,
             Rng& rng) {
  if (box_low.size() != layer_sizes.back() || box_high.size() != layer_sizes.back())
    throw std::invalid_argument("output box does not match output layer size");
  if ((box_high.array() <= box_low.array()).any())
    throw std::invalid_argument("output box is empty");
  Mlp m = init_mlp(layer_sizes, OutputActivation::kBoundedBox, rng);
  m.box_low = box_low;
  m.box_high = box_high;
  return m;
}

static void check_input(const Mlp& m, const Matrix& input) {
  if (input.rows() != m.input_dim())
    throw std::invalid_argument("input width " + std::to_string(input.rows()) +
                                " does not match network input " + std::to_string(m.input_dim()));
}

ForwardCache forward_cached(const Mlp& m, const Matrix& input) {
  check_input(m, input);
  ForwardCache cache;
  cache.input = input;
  cache.pre.reserve(m.layer_count());
  cache.post.reserve(m.layer_count());
  const Matrix* x = &cache.input;
  for (int l = 0; l < m.layer_count(); ++l) {
    Matrix z = (m.weights[l] * (*x)).colwise() + m.biases[l];
    Matrix a;
    if (l + 1 < m.layer_count()) {
      a = z.cwiseMax(0.0);
    } else if (m.output_activation == OutputActivation::kBoundedBox) {
      const Vector center = 0.5 * (m.box_low + m.box_high);
      const Vector half = 0.5 * (m.box_high - m.box_low);
      a = ((z.array().tanh().colwise() * half.array()).colwise() + center.array()).matrix();
    } else {
      a = z;
    }
    cache.pre.push_back(std::move(z));
    cache.post.push_back(std::move(a));
    x = &cache.post.back();
  }
  return cache;
}

Matrix forward(const Mlp& m, const Matrix& input) {
  check_input(m, input);
  Matrix x = input;
  for (int l = 0; l < m.layer_count(); ++l) {
    Matrix z = (m.weights[l] * x).colwise() + m.biases[l];
    if (l + 1 < m.layer_count()) {
      x = z.cwiseMax(0.0);
    } else if (m.output_activation == OutputActivation::kBoundedBox) {
      const Vector center = 0.5 * (m.box_low + m.box_high);
      const Vector half = 0.5 * (m.box_high - m.box_low);
      x = ((z.array().tanh().colwise() * half.array()).colwise() + center.array()).matrix();
    } else {
      x = std::move(z);
    }
  }
  return x;
}

void GradientBundle::set_zero() {
  for (auto& w : d_weights) w.setZero();
  for (auto& b : d_biases) b.setZero();
}

void GradientBundle::add_scaled(const GradientBundle& other, double scale) {
  for (std::size_t l = 0; l < d_weights.size(); ++l) {
    d_weights[l] += scale * other.d_weights[l];
    d_biases[l] += scale * other.d_biases[l];
  }
}

GradientBundle zero_gradients(const Mlp& m) {
  GradientBundle g;
  for (int l = 0; l < m.layer_count(); ++l) {
    g.d_weights.push_back(Matrix::Zero(m.weights[l].rows(), m.weights[l].cols()));
    g.d_biases.push_back(Vector::Zero(m.biases[l].size()));
  }
  return g;
}

GradientBundle backward(const Mlp& m, const ForwardCache& cache, const Matrix& output_grad,
                        Matrix* input_grad) {
  if (output_grad.rows() != m.output_dim() || output_grad.cols() != cache.input.cols())
    throw std::invalid_argument("output gradient shape mismatch");
  if (!output_grad.allFinite() || !cache.input.allFinite())
    throw NumericalError("non-finite values in backward pass");

  GradientBundle grads = zero_gradients(m);
  Matrix delta;  // dL/d(pre-activation) of the current layer
  const int last = m.layer_count() - 1;
  if (m.output_activation == OutputActivation::kBoundedBox) {
    const Vector half = 0.5 * (m.box_high - m.box_low);
    Eigen::ArrayXXd th = cache.pre[last].array().tanh();
    delta = (output_grad.array() * ((1.0 - th.square()).colwise() * half.array())).matrix();
  } else {
    delta = output_grad;
  }
  for (int l = last; l >= 0; --l) {
    const Matrix& below = (l == 0) ? cache.input : cache.post[l - 1];
    grads.d_weights[l] = delta * below.transpose();
    grads.d_biases[l] = delta.rowwise().sum();
    if (l == 0) {
      if (input_grad) *input_grad = m.weights[0].transpose() * delta;
      break;
    }
    Matrix up = m.weights[l].transpose() * delta;
    // ReLU subgradient: zero where the pre-activation was <= 0.
    delta = (up.array() * (cache.pre[l - 1].array() > 0.0).cast<double>()).matrix();
  }
  return grads;
}

LossGrad mse_loss_backward(const Mlp& m, const Matrix& input, const Matrix& target) {
  if (target.rows() != m.output_dim() || target.cols() != input.cols())
    throw std::invalid_argument("mse target shape mismatch");
  if (!input.allFinite() || !target.allFinite())
    throw NumericalError("non-finite values in mse_loss_backward");
  ForwardCache cache = forward_cached(m, input);
  const Matrix residual = cache.output() - target;
  const double n = static_cast<double>(input.cols());
  LossGrad out;
  out.loss = residual.squaredNorm() / n;
  if (!std::isfinite(out.loss)) throw NumericalError("non-finite loss in mse_loss_backward");
  out.grads = backward(m, cache, (2.0 / n) * residual);
  return out;
}

AdamState make_adam_state(const Mlp& m) {
  AdamState s;
  for (int l = 0; l < m.layer_count(); ++l) {
    s.m_w.push_back(Matrix::Zero(m.weights[l].rows(), m.weights[l].cols()));
    s.v_w.push_back(Matrix::Zero(m.weights[l].rows(), m.weights[l].cols()));
    s.m_b.push_back(Vector::Zero(m.biases[l].size()));
    s.v_b.push_back(Vector::Zero(m.biases[l].size()));
  }
  return s;
}

void adam_step(Mlp& m, const GradientBundle& grads, AdamState& state, double learning_rate) {
  if (grads.d_weights.size() != m.weights.size())
    throw std::invalid_argument("gradient bundle does not match model");
  state.step += 1;
  const double b1 = state.beta1, b2 = state.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    if (!grads.d_weights[l].allFinite() || !grads.d_biases[l].allFinite())
      throw NumericalError("non-finite gradient in adam_step");
    auto& mw = state.m_w[l];
    auto& vw = state.v_w[l];
    mw = b1 * mw + (1.0 - b1) * grads.d_weights[l];
    vw = (b2 * vw.array() + (1.0 - b2) * grads.d_weights[l].array().square()).matrix();
    m.weights[l].array() -=
        learning_rate * (mw.array() / c1) / ((vw.array() / c2).sqrt() + state.epsilon);
    auto& mb = state.m_b[l];
    auto& vb = state.v_b[l];
    mb = b1 * mb + (1.0 - b1) * grads.d_biases[l];
    vb = (b2 * vb.array() + (1.0 - b2) * grads.d_biases[l].array().square()).matrix();
    m.biases[l].array() -=
        learning_rate * (mb.array() / c1) / ((vb.array() / c2).sqrt() + state.epsilon);
  }
}

void polyak_update(Mlp& target, const Mlp& online, double coefficient) {
  if (target.layer_sizes != online.layer_sizes)
    throw std::invalid_argument("polyak_update across different architectures");
  if (coefficient < 0.0 || coefficient > 1.0)
    throw std::invalid_argument("polyak coefficient outside [0, 1]");
  for (std::size_t l = 0; l < target.weights.size(); ++l) {
    target.weights[l] = coefficient * target.weights[l] + (1.0 - coefficient) * online.weights[l];
    target.biases[l] = coefficient * target.biases[l] + (1.0 - coefficient) * online.biases[l];
  }
}

double grad_check(const Mlp& m, const std::function<double(const Mlp&)>& loss,
                  const GradientBundle& analytic, double h) {
  Mlp probe = m;
  double max_err = 0.0;
  auto probe_param = [&](double& param, double analytic_grad) {
    const double saved = param;
    param = saved + h;
    const double up = loss(probe);
    param = saved - h;
    const double down = loss(probe);
    param = saved;
    const double fd = (up - down) / (2.0 * h);
    const double err = std::abs(fd - analytic_grad) / (std::abs(fd) + std::abs(analytic_grad) + 1e-6);
    if (err > max_err) max_err = err;
  };
  for (int l = 0; l < m.layer_count(); ++l) {
    for (int i = 0; i < probe.weights[l].rows(); ++i)
      for (int j = 0; j < probe.weights[l].cols(); ++j)
        probe_param(probe.weights[l](i, j), analytic.d_weights[l](i, j));
    for (int i = 0; i < probe.biases[l].size(); ++i)
      probe_param(probe.biases[l](i), analytic.d_biases[l](i));
  }
  return max_err;
}

namespace {

constexpr char kMagic[4] = {'M', 'G', 'M', '1'};

void write_i32(std::ostream& out, std::int32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void write_f64(std::ostream& out, double v) { out.write(reinterpret_cast<const char*>(&v), 8); }
std::int32_t read_i32(std::istream& in) {
  std::int32_t v;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
double read_f64(std::istream& in) {
  double v;
  in.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

}  // namespace

void save_mlp(const Mlp& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(kMagic, 4);
  write_i32(out, static_cast<std::int32_t>(m.layer_sizes.size()));
  for (int s : m.layer_sizes) write_i32(out, s);
  write_i32(out, static_cast<std::int32_t>(m.output_activation));
  if (m.output_activation == OutputActivation::kBoundedBox) {
    for (int i = 0; i < m.output_dim(); ++i) write_f64(out, m.box_low(i));
    for (int i = 0; i < m.output_dim(); ++i) write_f64(out, m.box_high(i));
  }
  for (int l = 0; l < m.layer_count(); ++l) {
    for (int i = 0; i < m.weights[l].rows(); ++i)
      for (int j = 0; j < m.weights[l].cols(); ++j) write_f64(out, m.weights[l](i, j));
    for (int i = 0; i < m.biases[l].size(); ++i) write_f64(out, m.biases[l](i));
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Mlp load_mlp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error(path.string() + " is not a model checkpoint");
  const std::int32_t n_sizes = read_i32(in);
  if (n_sizes < 2 || n_sizes > 64) throw std::runtime_error("corrupt checkpoint header");
  std::vector<int> sizes(n_sizes);
  for (auto& s : sizes) s = read_i32(in);
  Mlp m;
  m.layer_sizes = sizes;
  m.output_activation = static_cast<OutputActivation>(read_i32(in));
  if (m.output_activation == OutputActivation::kBoundedBox) {
    m.box_low = Vector(m.output_dim());
    m.box_high = Vector(m.output_dim());
    for (int i = 0; i < m.output_dim(); ++i) m.box_low(i) = read_f64(in);
    for (int i = 0; i < m.output_dim(); ++i) m.box_high(i) = read_f64(in);
  }
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    Matrix w(sizes[l + 1], sizes[l]);
    for (int i = 0; i < w.rows(); ++i)
      for (int j = 0; j < w.cols(); ++j) w(i, j) = read_f64(in);
    Vector b(sizes[l + 1]);
    for (int i = 0; i < b.size(); ++i) b(i) = read_f64(in);
    m.weights.push_back(std::move(w));
    m.biases.push_back(std::move(b));
  }
  if (!in) throw std::runtime_error("truncated checkpoint " + path.string());
  return m;
}

}  // namespace mgrl
