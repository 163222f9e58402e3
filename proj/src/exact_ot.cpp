#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "persalign/ot.hpp"

namespace persalign {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vector checked_marginal(std::span<const double> m, Eigen::Index n, const char* name) {
  if (static_cast<Eigen::Index>(m.size()) != n) {
    throw Error(ErrorCode::kDimensionMismatch, std::string(name) + " has length " +
                                                   std::to_string(m.size()) + ", expected " +
                                                   std::to_string(n));
  }
  Vector v = Eigen::Map<const Vector>(m.data(), n);
  if (!v.allFinite() || (v.array() < 0.0).any()) {
    throw Error(ErrorCode::kNonFiniteWeight, std::string(name) + " must be finite and nonnegative");
  }
  return v;
}

}  // namespace

// Successive shortest paths. Every source->sink edge is uncapacitated, so the
// residual network has all forward edges plus a backward edge wherever flow is
// positive. Each augmentation exhausts a supply, a demand, or a backward edge,
// and shortest-path augmentation keeps the flow optimal at every step.
ExactOtResult exact_ot_small(const CostMatrix& cost, std::span<const double> a_in,
                             std::span<const double> b_in) {
  const Eigen::Index n = cost.rows();
  const Eigen::Index m = cost.cols();
  if (static_cast<std::size_t>(n) * static_cast<std::size_t>(m) > kExactOtMaxEntries) {
    throw Error(ErrorCode::kInstanceTooLarge,
                "exact OT oracle is limited to " + std::to_string(kExactOtMaxEntries) +
                    " cost entries, got " + std::to_string(n * m));
  }
  Vector supply = checked_marginal(a_in, n, "row marginal");
  Vector demand = checked_marginal(b_in, m, "column marginal");
  if (std::abs(supply.sum() - demand.sum()) > 1e-9) {
    throw Error(ErrorCode::kInvalidConfig, "marginals carry different total mass");
  }
  const Matrix& c = cost.values();
  const double scale = std::max(1.0, cost.max_cost());
  const double mass_eps = 1e-15 * std::max(1.0, supply.sum());
  const double relax_eps = 1e-12 * scale;

  ExactOtResult out;
  out.plan = Matrix::Zero(n, m);
  Matrix& flow = out.plan;

  Vector dist_src(n), dist_snk(m);
  std::vector<Eigen::Index> pred_snk(static_cast<std::size_t>(m));  // source feeding sink j
  std::vector<Eigen::Index> pred_src(static_cast<std::size_t>(n));  // sink returning to source i

  const std::size_t max_augment = 4 * static_cast<std::size_t>(n * m + n + m) + 16;
  for (std::size_t round = 0; round < max_augment; ++round) {
    // Multi-source Bellman-Ford from every source with remaining supply.
    bool any_supply = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool open = supply(i) > mass_eps;
      dist_src(i) = open ? 0.0 : kInf;
      pred_src[static_cast<std::size_t>(i)] = -1;
      any_supply |= open;
    }
    if (!any_supply) break;
    dist_snk.setConstant(kInf);
    std::fill(pred_snk.begin(), pred_snk.end(), -1);
    for (Eigen::Index pass = 0; pass < n + m + 1; ++pass) {
      bool changed = false;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (dist_src(i) == kInf) continue;
        for (Eigen::Index j = 0; j < m; ++j) {
          const double d = dist_src(i) + c(i, j);
          if (d < dist_snk(j) - relax_eps) {
            dist_snk(j) = d;
            pred_snk[static_cast<std::size_t>(j)] = i;
            changed = true;
          }
        }
      }
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
          if (flow(i, j) <= mass_eps || dist_snk(j) == kInf) continue;
          const double d = dist_snk(j) - c(i, j);
          if (d < dist_src(i) - relax_eps) {
            dist_src(i) = d;
            pred_src[static_cast<std::size_t>(i)] = j;
            changed = true;
          }
        }
      }
      if (!changed) break;
    }

    Eigen::Index target = -1;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (demand(j) > mass_eps && dist_snk(j) < kInf &&
          (target < 0 || dist_snk(j) < dist_snk(target))) {
        target = j;
      }
    }
    if (target < 0) break;

    // Walk back to the originating source, collecting the bottleneck.
    double amount = demand(target);
    Eigen::Index j = target;
    Eigen::Index i = pred_snk[static_cast<std::size_t>(j)];
    for (;;) {
      const Eigen::Index back = pred_src[static_cast<std::size_t>(i)];
      if (back < 0) {
        amount = std::min(amount, supply(i));
        break;
      }
      amount = std::min(amount, flow(i, back));
      j = back;
      i = pred_snk[static_cast<std::size_t>(j)];
    }
    j = target;
    i = pred_snk[static_cast<std::size_t>(j)];
    demand(target) -= amount;
    for (;;) {
      flow(i, j) += amount;
      const Eigen::Index back = pred_src[static_cast<std::size_t>(i)];
      if (back < 0) {
        supply(i) -= amount;
        break;
      }
      flow(i, back) -= amount;
      j = back;
      i = pred_snk[static_cast<std::size_t>(j)];
    }
  }
  flow = flow.cwiseMax(0.0);
  out.cost = (flow.array() * c.array()).sum();
  return out;
}

}  // namespace persalign
