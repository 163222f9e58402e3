#pragma once

#include <span>
#include <vector>

#include "persalign/core.hpp"

namespace persalign {

// Isotropic Gaussian KDE, evaluated in log space.
//
// Samples are kept sorted by their first coordinate so that a query only
// visits the contiguous band of samples whose kernel term can still matter:
// terms more than `cutoff()` nats below the running maximum are skipped, which
// bounds the relative error of the sum by M * exp(-cutoff) < 1e-15.
class DensityModel {
 public:
  DensityModel(const ResponseMatrix& samples, double bandwidth);

  double bandwidth() const noexcept { return bandwidth_; }
  // log(M * (2 pi h^2)^(d/2))
  double log_norm_const() const noexcept { return log_norm_const_; }
  std::size_t sample_count() const noexcept { return count_; }
  Eigen::Index dims() const noexcept { return dims_; }
  double cutoff() const noexcept { return cutoff_; }

  // log of sum_j exp(-|x - s_j|^2 / (2h^2)), without the normalizer.
  double log_kernel_sum(std::span<const double> x) const;

 private:
  double bandwidth_;
  double log_norm_const_;
  double inv_two_h2_;
  double cutoff_;
  std::size_t count_;
  Eigen::Index dims_;
  // dims_ x count_, column j is the j-th sample in sorted order.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> sorted_;
};

DensityModel fit_kde(const ResponseMatrix& samples, double bandwidth);

double log_density(const DensityModel& model, std::span<const double> x);

struct ImportanceWeights {
  std::vector<double> weights;
  // Unclamped log ratios, log r_human(x_i) - log r_persona(x_i).
  std::vector<double> log_ratios;
  std::size_t clamped_low = 0;
  std::size_t clamped_high = 0;
};

inline constexpr double kDefaultLogWeightCap = 30.0;

ImportanceWeights importance_weights_detailed(const DensityModel& human, const DensityModel& persona,
                                              const ResponseMatrix& x,
                                              double log_cap = kDefaultLogWeightCap);

// w_i = exp(clamp(log r_human(x_i) - log r_persona(x_i), -cap, cap))
std::vector<double> importance_weights(const DensityModel& human, const DensityModel& persona,
                                       const ResponseMatrix& x, double log_cap = kDefaultLogWeightCap);

}  // namespace persalign
