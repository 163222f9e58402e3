#include "persalign/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "persalign/sampling.hpp"

namespace persalign {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Vector marginal_or_uniform(std::span<const double> given, Eigen::Index n, const char* name) {
  if (given.empty()) return Vector::Constant(n, 1.0 / static_cast<double>(n));
  if (static_cast<Eigen::Index>(given.size()) != n) {
    throw Error(ErrorCode::kDimensionMismatch, std::string(name) + " has length " +
                                                   std::to_string(given.size()) + ", expected " +
                                                   std::to_string(n));
  }
  Vector v = Eigen::Map<const Vector>(given.data(), n);
  if (!v.allFinite() || (v.array() < 0.0).any()) {
    throw Error(ErrorCode::kNonFiniteWeight, std::string(name) + " must be finite and nonnegative");
  }
  if (std::abs(v.sum() - 1.0) > 1e-12) {
    throw Error(ErrorCode::kInvalidConfig, std::string(name) + " must sum to 1, sums to " +
                                               std::to_string(v.sum()));
  }
  return v;
}

void check_finite_lse(double value, const char* axis, Eigen::Index index) {
  if (!std::isfinite(value)) {
    throw Error(ErrorCode::kNumericalCollapse,
                std::string(axis) + " " + std::to_string(index) +
                    " of the Gibbs kernel underflowed entirely; epsilon is too small for this cost scale");
  }
}

}  // namespace

CostMatrix::CostMatrix(Matrix values) : values_(std::move(values)) {
  if (values_.size() == 0) throw Error(ErrorCode::kEmptyInput, "cost matrix is empty");
  if (!values_.allFinite() || (values_.array() < 0.0).any()) {
    throw Error(ErrorCode::kNonFiniteValue, "cost entries must be finite and >= 0");
  }
  std::vector<double> flat(values_.data(), values_.data() + values_.size());
  const std::size_t mid = flat.size() / 2;
  std::nth_element(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(mid), flat.end());
  median_ = flat[mid];
  if (flat.size() % 2 == 0) {
    const double lower = *std::max_element(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(mid));
    median_ = 0.5 * (lower + median_);
  }
  max_ = values_.maxCoeff();
}

CostMatrix cost_matrix(const ResponseMatrix& x, const ResponseMatrix& y,
                       const std::optional<ItemWeights>& weights) {
  if (x.dims() != y.dims()) {
    throw Error(ErrorCode::kDimensionMismatch, "cost matrix needs equal dimensions, got " +
                                                   std::to_string(x.dims()) + " and " +
                                                   std::to_string(y.dims()));
  }
  const Eigen::Index d = x.dims();
  Eigen::RowVectorXd w = Eigen::RowVectorXd::Ones(d);
  if (weights) {
    if (static_cast<Eigen::Index>(weights->size()) != d) {
      throw Error(ErrorCode::kDimensionMismatch, "item weights have length " +
                                                     std::to_string(weights->size()) + ", expected " +
                                                     std::to_string(d));
    }
    w = Eigen::Map<const Eigen::RowVectorXd>(weights->values().data(), d);
  }
  const Eigen::Index n = static_cast<Eigen::Index>(x.size());
  const Eigen::Index m = static_cast<Eigen::Index>(y.size());
  // Column-major copy of Y so each item is a contiguous run over humans.
  const Eigen::MatrixXd yt = y.values();
  Matrix c(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto out = c.row(i).array();
    out.setZero();
    for (Eigen::Index k = 0; k < d; ++k) {
      out += w(k) * (yt.col(k).transpose().array() - x.values()(i, k)).square();
    }
  }
  return CostMatrix(std::move(c));
}

Matrix gibbs_kernel(const CostMatrix& cost, double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw Error(ErrorCode::kNonPositiveEpsilon, "epsilon must be finite and > 0");
  }
  return (-cost.values().array() / epsilon).exp().matrix();
}

double TransportPlan::transport_cost(const CostMatrix& cost) const {
  return (gamma.array() * cost.values().array()).sum();
}

double effective_epsilon(const CostMatrix& cost, double epsilon, bool absolute) {
  const double eff = absolute ? epsilon : epsilon * cost.median_cost();
  if (!(eff > 0.0) || !std::isfinite(eff)) {
    throw Error(ErrorCode::kNonPositiveEpsilon,
                absolute ? "epsilon must be finite and > 0"
                         : "effective epsilon is not positive (median cost " +
                               std::to_string(cost.median_cost()) + ")");
  }
  return eff;
}

TransportPlan sinkhorn(const CostMatrix& cost, std::span<const double> a_in,
                       std::span<const double> b_in, double epsilon, const SinkhornOptions& options) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw Error(ErrorCode::kNonPositiveEpsilon, "epsilon must be finite and > 0");
  }
  if (options.max_iters < 1) throw Error(ErrorCode::kInvalidConfig, "max_iters must be >= 1");
  if (!(options.tol > 0.0)) throw Error(ErrorCode::kInvalidConfig, "tol must be > 0");
  const Matrix& c = cost.values();
  const Eigen::Index n = c.rows();
  const Eigen::Index m = c.cols();
  const double inv_eps = 1.0 / epsilon;
  if (!std::isfinite(inv_eps)) {
    throw Error(ErrorCode::kNumericalCollapse, "1/epsilon overflows");
  }

  TransportPlan plan;
  plan.row_target = marginal_or_uniform(a_in, n, "row marginal");
  plan.col_target = marginal_or_uniform(b_in, m, "column marginal");
  plan.epsilon = epsilon;
  const Eigen::ArrayXd log_a = plan.row_target.array().log();
  const Eigen::RowVectorXd log_b = plan.col_target.transpose().array().log().matrix();

  Eigen::ArrayXd f(n);
  Eigen::RowVectorXd g = Eigen::RowVectorXd::Zero(m);
  Eigen::ArrayXd row_lse(n);
  Eigen::RowVectorXd col_max(m);
  Eigen::RowVectorXd col_sum(m);
  Eigen::RowVectorXd buf(m);

  // row_lse_i = log sum_j exp(g_j - C_ij / eps)
  auto update_row_lse = [&]() {
    for (Eigen::Index i = 0; i < n; ++i) {
      buf.noalias() = g - c.row(i) * inv_eps;
      const double mx = buf.maxCoeff();
      row_lse(i) = mx + std::log((buf.array() - mx).exp().sum());
      check_finite_lse(row_lse(i), "row", i);
    }
  };
  // g_j = log b_j - log sum_i exp(f_i - C_ij / eps)
  auto update_g = [&]() {
    col_max.setConstant(kNegInf);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (f(i) == kNegInf) continue;
      col_max.array() = col_max.array().max(f(i) - c.row(i).array() * inv_eps);
    }
    col_sum.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (f(i) == kNegInf) continue;
      col_sum.array() += ((f(i) - c.row(i).array() * inv_eps) - col_max.array()).exp();
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      const double lse = col_max(j) + std::log(col_sum(j));
      check_finite_lse(lse, "column", j);
      g(j) = log_b(j) - lse;
    }
  };

  // Each sweep updates u then v, so the columns are exact on exit and the
  // row marginal carries whatever residual is left.
  update_row_lse();
  for (std::size_t it = 1; it <= options.max_iters; ++it) {
    f = log_a - row_lse;
    update_g();
    update_row_lse();
    plan.iterations = it;
    const double residual = ((f + row_lse).exp() - plan.row_target.array()).abs().maxCoeff();
    if (residual <= options.tol) break;
  }

  plan.log_u = f.matrix();
  plan.log_v = g.transpose();
  plan.gamma.resize(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    plan.gamma.row(i) = ((g.array() - c.row(i).array() * inv_eps) + f(i)).exp();
  }
  plan.row_residual = (plan.gamma.rowwise().sum() - plan.row_target).cwiseAbs().maxCoeff();
  plan.col_residual =
      (plan.gamma.colwise().sum().transpose() - plan.col_target).cwiseAbs().maxCoeff();
  plan.converged = plan.row_residual <= options.tol && plan.col_residual <= options.tol;
  return plan;
}

std::vector<double> ot_weights(const TransportPlan& plan, bool allow_unconverged) {
  if (!plan.converged && !allow_unconverged) {
    throw Error(ErrorCode::kUnconvergedPlan,
                "transport plan did not converge after " + std::to_string(plan.iterations) +
                    " iterations (row residual " + std::to_string(plan.row_residual) +
                    ", column residual " + std::to_string(plan.col_residual) + ")");
  }
  const Vector rows = plan.gamma.rowwise().sum();
  return std::vector<double>(rows.data(), rows.data() + rows.size());
}

std::vector<std::size_t> resample_ot(std::span<const double> weights, std::size_t n_final,
                                     std::uint64_t seed) {
  return multinomial_draw(normalize_weights(weights), n_final, seed);
}

BatchedOtResult batched_ot_weights_detailed(const ResponseMatrix& x, const ResponseMatrix& y,
                                            const AlignmentConfig& config) {
  validate_config(config);
  if (x.dims() != y.dims()) {
    throw Error(ErrorCode::kDimensionMismatch, "batched OT needs equal dimensions");
  }
  const std::size_t m = y.size();
  const std::size_t batch = config.ot_batch_size;
  BatchedOtResult out;
  out.weights.assign(x.size(), 0.0);
  for (std::size_t start = 0, index = 0; start < m; start += batch, ++index) {
    const std::size_t len = std::min(batch, m - start);
    try {
      std::vector<std::size_t> rows(len);
      for (std::size_t r = 0; r < len; ++r) rows[r] = start + r;
      const ResponseMatrix y_batch = (len == m) ? y : y.select_rows(rows);
      const CostMatrix cost = cost_matrix(x, y_batch, config.item_weights);
      const double eps = effective_epsilon(cost, config.epsilon, config.epsilon_absolute);
      const TransportPlan plan =
          sinkhorn(cost, {}, {}, eps, {config.sinkhorn_iters, config.sinkhorn_tol});
      out.batches.push_back({index, len, eps, plan.iterations, plan.converged, plan.row_residual,
                             plan.col_residual});
      const std::vector<double> w = ot_weights(plan, config.allow_unconverged);
      const double share = static_cast<double>(len) / static_cast<double>(m);
      for (std::size_t i = 0; i < w.size(); ++i) out.weights[i] += share * w[i];
    } catch (const Error& e) {
      rethrow_with_context(e, "OT batch " + std::to_string(index));
    }
  }
  return out;
}

std::vector<double> batched_ot_weights(const ResponseMatrix& x, const ResponseMatrix& y,
                                       const AlignmentConfig& config) {
  return batched_ot_weights_detailed(x, y, config).weights;
}

}  // namespace persalign
