#pragma once

#include <cstdint>

#include "mgrl/mlp.hpp"

namespace mgrl {

// Per-dimension running mean/std. Normalized values are clipped to
// [-clip, clip]. With no data yet it is the identity (mean 0, std 1).
// The std has a small floor so near-constant dimensions stay bounded.
class RunningNormalizer {
 public:
  explicit RunningNormalizer(int dim, double clip = 5.0)
      : sum_(Vector::Zero(dim)), sumsq_(Vector::Zero(dim)), count_(0), clip_(clip) {}

  int dim() const { return static_cast<int>(sum_.size()); }
  std::int64_t count() const { return count_; }

  void update(const Matrix& samples) {
    if (samples.rows() != dim()) throw std::invalid_argument("normalizer dim mismatch");
    if (!samples.allFinite()) throw NumericalError("non-finite normalizer update");
    sum_ += samples.rowwise().sum();
    sumsq_ += samples.array().square().matrix().rowwise().sum();
    count_ += samples.cols();
  }

  Vector mean() const {
    return count_ == 0 ? Vector::Zero(dim()) : Vector(sum_ / static_cast<double>(count_));
  }

  Vector stddev() const {
    if (count_ == 0) return Vector::Ones(dim());
    const double n = static_cast<double>(count_);
    Vector var = sumsq_ / n - (sum_ / n).array().square().matrix();
    return var.array().max(kStdFloor * kStdFloor).sqrt();
  }

  Matrix normalize(const Matrix& x) const {
    if (x.rows() != dim()) throw std::invalid_argument("normalizer dim mismatch");
    if (count_ == 0) return x.array().min(clip_).max(-clip_).matrix();
    const Vector mu = mean();
    const Vector sd = stddev();
    return (((x.colwise() - mu).array().colwise() / sd.array()).min(clip_).max(-clip_)).matrix();
  }

  Vector normalize(const Vector& x) const { return normalize(Matrix(x)); }

  Vector raw_sum() const { return sum_; }
  Vector raw_sumsq() const { return sumsq_; }
  void restore(const Vector& sum, const Vector& sumsq, std::int64_t count) {
    if (sum.size() != dim() || sumsq.size() != dim())
      throw std::invalid_argument("normalizer restore dim mismatch");
    sum_ = sum;
    sumsq_ = sumsq;
    count_ = count;
  }

 private:
  static constexpr double kStdFloor = 1e-2;
  Vector sum_, sumsq_;
  std::int64_t count_;
  double clip_;
};

}  // namespace mgrl
