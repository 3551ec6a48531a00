#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace etmpc {

// Running per-feature standardization (Welford). Statistics accumulate during
// a warm-up window and are frozen afterwards so log-probabilities stay
// comparable across training phases.
class FeatureNormalizer {
 public:
  explicit FeatureNormalizer(int dim)
      : mean_(Eigen::VectorXd::Zero(dim)), m2_(Eigen::VectorXd::Zero(dim)) {}

  Eigen::VectorXd normalize(const Eigen::VectorXd& x) const {
    if (count_ == 0) return x;
    return (x - mean_).cwiseQuotient((m2_ / static_cast<double>(count_)).cwiseSqrt().array().max(1e-4).matrix());
  }

  void observe(const Eigen::VectorXd& x) {
    if (frozen_) return;
    ++count_;
    const Eigen::VectorXd delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta.cwiseProduct(x - mean_);
  }

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }
  std::int64_t count() const { return count_; }

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& m2() const { return m2_; }
  void restore(const Eigen::VectorXd& mean, const Eigen::VectorXd& m2, std::int64_t count, bool frozen) {
    mean_ = mean;
    m2_ = m2;
    count_ = count;
    frozen_ = frozen;
  }

 private:
  Eigen::VectorXd mean_, m2_;
  std::int64_t count_ = 0;
  bool frozen_ = false;
};

}  // namespace etmpc
