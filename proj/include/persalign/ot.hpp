#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "persalign/core.hpp"

namespace persalign {

// Nonnegative N x M cost with its median cached (mean of the two middle
// entries when N*M is even).
class CostMatrix {
 public:
  explicit CostMatrix(Matrix values);

  const Matrix& values() const noexcept { return values_; }
  double median_cost() const noexcept { return median_; }
  double max_cost() const noexcept { return max_; }
  Eigen::Index rows() const noexcept { return values_.rows(); }
  Eigen::Index cols() const noexcept { return values_.cols(); }

 private:
  Matrix values_;
  double median_;
  double max_;
};

// C_ij = sum_k w_k (x_ik - y_jk)^2; unit weights when none are given.
CostMatrix cost_matrix(const ResponseMatrix& x, const ResponseMatrix& y,
                       const std::optional<ItemWeights>& weights = std::nullopt);

// K_ij = exp(-C_ij / epsilon), epsilon absolute.
Matrix gibbs_kernel(const CostMatrix& cost, double epsilon);

// Entropic plan Gamma = diag(u) K diag(v). The scalings are kept as log
// potentials (log u, log v) since u and v themselves overflow at small epsilon.
struct TransportPlan {
  Matrix gamma;
  Vector row_target;
  Vector col_target;
  Vector log_u;
  Vector log_v;
  double epsilon = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  double row_residual = 0.0;
  double col_residual = 0.0;

  Vector scaling_u() const { return log_u.array().exp(); }
  Vector scaling_v() const { return log_v.array().exp(); }
  double transport_cost(const CostMatrix& cost) const;
};

struct SinkhornOptions {
  std::size_t max_iters = 250;
  double tol = 1e-6;
};

// Log-domain Sinkhorn-Knopp; epsilon is absolute. Empty a/b mean uniform.
// Stops when the row residual of the current iterate is <= tol (columns are
// matched exactly by the preceding update) or after max_iters iterations.
TransportPlan sinkhorn(const CostMatrix& cost, std::span<const double> a, std::span<const double> b,
                       double epsilon, const SinkhornOptions& options = {});

// epsilon * median_cost, or epsilon itself when absolute.
double effective_epsilon(const CostMatrix& cost, double epsilon, bool absolute);

// Row sums of the plan. Unconverged plans are refused unless allowed.
std::vector<double> ot_weights(const TransportPlan& plan, bool allow_unconverged = false);

std::vector<std::size_t> resample_ot(std::span<const double> weights, std::size_t n_final,
                                     std::uint64_t seed);

struct BatchDiagnostics {
  std::size_t batch = 0;
  std::size_t size = 0;
  double epsilon = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  double row_residual = 0.0;
  double col_residual = 0.0;
};

struct BatchedOtResult {
  std::vector<double> weights;
  std::vector<BatchDiagnostics> batches;
};

// Splits Y into contiguous batches of at most ot_batch_size rows, solves each
// against all of X, and averages the row marginals with weights proportional
// to batch size (fixed ascending batch order).
BatchedOtResult batched_ot_weights_detailed(const ResponseMatrix& x, const ResponseMatrix& y,
                                            const AlignmentConfig& config);
std::vector<double> batched_ot_weights(const ResponseMatrix& x, const ResponseMatrix& y,
                                       const AlignmentConfig& config);

struct ExactOtResult {
  double cost = 0.0;
  Matrix plan;
};

inline constexpr std::size_t kExactOtMaxEntries = 10'000;

// Unregularized optimal transport by successive shortest paths on the
// bipartite transport network. Verification oracle; limited to N*M <= 10^4.
ExactOtResult exact_ot_small(const CostMatrix& cost, std::span<const double> a,
                             std::span<const double> b);

}  // namespace persalign
