#include "persalign/kde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace persalign {

namespace {

constexpr Eigen::Index kBlock = 256;

// Running log-sum-exp accumulator.
struct LogSum {
  double max = -std::numeric_limits<double>::infinity();
  double sum = 0.0;

  void add_block(const Eigen::ArrayXd& terms) {
    const double bmax = terms.maxCoeff();
    if (bmax == -std::numeric_limits<double>::infinity()) return;
    if (bmax > max) {
      sum = (max == -std::numeric_limits<double>::infinity()) ? 0.0 : sum * std::exp(max - bmax);
      max = bmax;
    }
    sum += (terms - max).exp().sum();
  }

  double value() const {
    if (max == -std::numeric_limits<double>::infinity()) return max;
    return max + std::log(sum);
  }
};

}  // namespace

DensityModel::DensityModel(const ResponseMatrix& samples, double bandwidth)
    : bandwidth_(bandwidth), count_(samples.size()), dims_(samples.dims()) {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw Error(ErrorCode::kNonPositiveBandwidth,
                "bandwidth must be finite and > 0, got " + std::to_string(bandwidth));
  }
  const double d = static_cast<double>(dims_);
  log_norm_const_ = std::log(static_cast<double>(count_)) +
                    0.5 * d * std::log(2.0 * std::numbers::pi * bandwidth * bandwidth);
  inv_two_h2_ = 1.0 / (2.0 * bandwidth * bandwidth);
  cutoff_ = std::log(static_cast<double>(count_)) + 36.0;

  const Matrix& v = samples.values();
  std::vector<Eigen::Index> order(count_);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return v(a, 0) < v(b, 0); });
  sorted_.resize(dims_, static_cast<Eigen::Index>(count_));
  for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(count_); ++j) {
    sorted_.col(j) = v.row(order[static_cast<std::size_t>(j)]).transpose();
  }
}

double DensityModel::log_kernel_sum(std::span<const double> x) const {
  if (static_cast<Eigen::Index>(x.size()) != dims_) {
    throw Error(ErrorCode::kDimensionMismatch, "query has dimension " + std::to_string(x.size()) +
                                                   ", model has " + std::to_string(dims_));
  }
  for (double xi : x) {
    if (!std::isfinite(xi)) throw Error(ErrorCode::kNonFiniteValue, "query contains a non-finite value");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(count_);
  const auto first = sorted_.row(0);
  const double* begin = first.data();
  const Eigen::Index pos = std::lower_bound(begin, begin + n, x[0]) - begin;

  LogSum acc;
  Eigen::ArrayXd terms;
  auto process = [&](Eigen::Index lo, Eigen::Index hi) {
    const Eigen::Index len = hi - lo;
    terms = (sorted_.row(0).segment(lo, len).array() - x[0]).square();
    for (Eigen::Index k = 1; k < dims_; ++k) {
      terms += (sorted_.row(k).segment(lo, len).array() - x[static_cast<std::size_t>(k)]).square();
    }
    terms *= -inv_two_h2_;
    acc.add_block(terms);
  };
  // The first-coordinate gap lower-bounds the full distance, so once the gap
  // term falls `cutoff_` below the running max nothing further out can count.
  auto still_relevant = [&](double coord) {
    const double gap = coord - x[0];
    return -gap * gap * inv_two_h2_ >= acc.max - cutoff_;
  };

  Eigen::Index left = pos;
  Eigen::Index right = pos;
  bool go_left = left > 0;
  bool go_right = right < n;
  while (go_left || go_right) {
    if (go_right) {
      if (right < n && still_relevant(first(right))) {
        const Eigen::Index hi = std::min(n, right + kBlock);
        process(right, hi);
        right = hi;
      } else {
        go_right = false;
      }
    }
    if (go_left) {
      if (left > 0 && still_relevant(first(left - 1))) {
        const Eigen::Index lo = std::max<Eigen::Index>(0, left - kBlock);
        process(lo, left);
        left = lo;
      } else {
        go_left = false;
      }
    }
  }
  return acc.value();
}

DensityModel fit_kde(const ResponseMatrix& samples, double bandwidth) {
  return DensityModel(samples, bandwidth);
}

double log_density(const DensityModel& model, std::span<const double> x) {
  return model.log_kernel_sum(x) - model.log_norm_const();
}

ImportanceWeights importance_weights_detailed(const DensityModel& human, const DensityModel& persona,
                                              const ResponseMatrix& x, double log_cap) {
  if (human.dims() != x.dims() || persona.dims() != x.dims()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "importance weights need equal dimensions: human " + std::to_string(human.dims()) +
                    ", persona " + std::to_string(persona.dims()) + ", queries " +
                    std::to_string(x.dims()));
  }
  if (!(log_cap > 0.0)) throw Error(ErrorCode::kInvalidConfig, "log weight cap must be > 0");
  ImportanceWeights out;
  out.weights.resize(x.size());
  out.log_ratios.resize(x.size());
  std::vector<double> row(static_cast<std::size_t>(x.dims()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    Eigen::Map<Eigen::RowVectorXd>(row.data(), x.dims()) = x.row(i);
    const double lr = log_density(human, row) - log_density(persona, row);
    out.log_ratios[i] = lr;
    double clamped = lr;
    // -inf - -inf is NaN: both densities underflowed, treat as no information.
    if (std::isnan(lr)) clamped = 0.0;
    if (clamped > log_cap) {
      clamped = log_cap;
      ++out.clamped_high;
    } else if (clamped < -log_cap) {
      clamped = -log_cap;
      ++out.clamped_low;
    }
    out.weights[i] = std::exp(clamped);
  }
  return out;
}

std::vector<double> importance_weights(const DensityModel& human, const DensityModel& persona,
                                       const ResponseMatrix& x, double log_cap) {
  return importance_weights_detailed(human, persona, x, log_cap).weights;
}

}  // namespace persalign
