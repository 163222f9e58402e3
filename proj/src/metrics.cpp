#include "persalign/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "persalign/rng.hpp"

namespace persalign {

namespace {

void require_same_dims(const ResponseMatrix& x, const ResponseMatrix& y) {
  if (x.dims() != y.dims()) {
    throw Error(ErrorCode::kDimensionMismatch, "metric inputs have " + std::to_string(x.dims()) +
                                                   " and " + std::to_string(y.dims()) + " items");
  }
}

std::vector<double> sorted_copy(std::span<const double> v) {
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  return s;
}

void require_nonempty_finite(std::span<const double> v, const char* name) {
  if (v.empty()) throw Error(ErrorCode::kEmptyInput, std::string(name) + " is empty");
  for (double e : v) {
    if (!std::isfinite(e)) throw Error(ErrorCode::kNonFiniteValue, std::string(name) + " has a non-finite value");
  }
}

std::vector<double> column(const ResponseMatrix& m, Eigen::Index k) {
  std::vector<double> out(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = m.values()(static_cast<Eigen::Index>(i), k);
  return out;
}

// Sum of exp(-|a_i - b_j|^2 * scale) over all pairs.
double kernel_sum(const Matrix& a, const Matrix& b, double scale) {
  const Eigen::MatrixXd bt = b;  // column-major: each item contiguous over rows
  Eigen::ArrayXd d2(bt.rows());
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    d2.setZero();
    for (Eigen::Index k = 0; k < a.cols(); ++k) d2 += (bt.col(k).array() - a(i, k)).square();
    total += (-scale * d2).exp().sum();
  }
  return total;
}

Eigen::RowVectorXd column_means(const Matrix& v) { return v.colwise().mean(); }

Eigen::MatrixXd covariance(const Matrix& v) {
  const Eigen::MatrixXd centered = v.rowwise() - column_means(v);
  return (centered.transpose() * centered) / static_cast<double>(v.rows() - 1);
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double wasserstein_1d(std::span<const double> x, std::span<const double> y) {
  require_nonempty_finite(x, "x");
  require_nonempty_finite(y, "y");
  const std::vector<double> xs = sorted_copy(x);
  const std::vector<double> ys = sorted_copy(y);
  if (xs.size() == ys.size()) {
    double sum = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) sum += std::abs(xs[i] - ys[i]);
    return sum / static_cast<double>(xs.size());
  }
  // Sweep the merged support; between consecutive support points both CDFs are
  // constant, so the integrand is |i/n - j/m| on that interval.
  const double nx = static_cast<double>(xs.size());
  const double ny = static_cast<double>(ys.size());
  std::size_t i = 0, j = 0;
  double prev = std::min(xs[0], ys[0]);
  double total = 0.0;
  while (i < xs.size() || j < ys.size()) {
    double next;
    if (j == ys.size() || (i < xs.size() && xs[i] <= ys[j])) {
      next = xs[i];
    } else {
      next = ys[j];
    }
    total += std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny) * (next - prev);
    while (i < xs.size() && xs[i] == next) ++i;
    while (j < ys.size() && ys[j] == next) ++j;
    prev = next;
  }
  return total;
}

double wasserstein2_1d(std::span<const double> x, std::span<const double> y) {
  require_nonempty_finite(x, "x");
  require_nonempty_finite(y, "y");
  const std::vector<double> xs = sorted_copy(x);
  const std::vector<double> ys = sorted_copy(y);
  // Integrate (F_x^-1(t) - F_y^-1(t))^2 over the merged quantile breakpoints.
  const double nx = static_cast<double>(xs.size());
  const double ny = static_cast<double>(ys.size());
  std::size_t i = 0, j = 0;
  double t = 0.0, total = 0.0;
  while (i < xs.size() && j < ys.size()) {
    const double tx = static_cast<double>(i + 1) / nx;
    const double ty = static_cast<double>(j + 1) / ny;
    const double next = std::min(tx, ty);
    const double diff = xs[i] - ys[j];
    total += diff * diff * (next - t);
    t = next;
    if (tx <= next) ++i;
    if (ty <= next) ++j;
  }
  return std::sqrt(total);
}

double amw(const ResponseMatrix& x, const ResponseMatrix& y) {
  require_same_dims(x, y);
  double total = 0.0;
  for (Eigen::Index k = 0; k < x.dims(); ++k) total += wasserstein_1d(column(x, k), column(y, k));
  return total / static_cast<double>(x.dims());
}

double frechet_distance(const ResponseMatrix& x, const ResponseMatrix& y) {
  require_same_dims(x, y);
  if (x.size() < 2 || y.size() < 2) {
    throw Error(ErrorCode::kInsufficientSamples, "Frechet distance needs at least 2 samples per side");
  }
  const Eigen::RowVectorXd mu = column_means(x.values()) - column_means(y.values());
  const Eigen::MatrixXd sx = covariance(x.values());
  const Eigen::MatrixXd sy = covariance(y.values());
  const Eigen::MatrixXd rx = psd_sqrt(sx);
  Eigen::MatrixXd inner = rx * sy * rx;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner, Eigen::EigenvaluesOnly);
  const double cross = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double fd = mu.squaredNorm() + sx.trace() + sy.trace() - 2.0 * cross;
  return std::max(0.0, fd);
}

Matrix sphere_directions(Eigen::Index dims, std::size_t count, std::uint64_t seed) {
  rng::Stream stream(seed, 0x534C4943ULL);
  Matrix dirs(static_cast<Eigen::Index>(count), dims);
  for (Eigen::Index p = 0; p < dirs.rows(); ++p) {
    double norm = 0.0;
    do {
      for (Eigen::Index k = 0; k < dims; ++k) dirs(p, k) = stream.normal();
      norm = dirs.row(p).norm();
    } while (norm == 0.0);
    dirs.row(p) /= norm;
  }
  return dirs;
}

double sliced_wasserstein(const ResponseMatrix& x, const ResponseMatrix& y, std::size_t n_projections,
                          std::uint64_t seed) {
  require_same_dims(x, y);
  if (n_projections < 1) throw Error(ErrorCode::kInvalidConfig, "n_projections must be >= 1");
  // In one dimension every direction is +-1 and W1 is reflection invariant.
  if (x.dims() == 1) return wasserstein_1d(column(x, 0), column(y, 0));
  const Matrix dirs = sphere_directions(x.dims(), n_projections, seed);
  const Eigen::MatrixXd px = x.values() * dirs.transpose();
  const Eigen::MatrixXd py = y.values() * dirs.transpose();
  double total = 0.0;
  for (Eigen::Index p = 0; p < dirs.rows(); ++p) {
    total += wasserstein_1d(std::span<const double>(px.col(p).data(), x.size()),
                            std::span<const double>(py.col(p).data(), y.size()));
  }
  return total / static_cast<double>(n_projections);
}

double median_heuristic_bandwidth(const ResponseMatrix& x, const ResponseMatrix& y) {
  require_same_dims(x, y);
  const std::size_t pooled = x.size() + y.size();
  std::size_t kx = x.size(), ky = y.size();
  if (pooled > kMedianHeuristicCap) {
    // Round the split symmetrically so swapping X and Y swaps kx and ky.
    const double share = static_cast<double>(x.size()) / static_cast<double>(pooled);
    kx = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(share * kMedianHeuristicCap)));
    ky = std::max<std::size_t>(1, kMedianHeuristicCap - kx);
  }
  auto strided = [](const ResponseMatrix& m, std::size_t k) {
    Matrix out(static_cast<Eigen::Index>(k), m.dims());
    for (std::size_t r = 0; r < k; ++r) {
      const std::size_t src = (r * m.size()) / k;
      out.row(static_cast<Eigen::Index>(r)) = m.row(src);
    }
    return out;
  };
  Matrix pts(static_cast<Eigen::Index>(kx + ky), x.dims());
  pts.topRows(static_cast<Eigen::Index>(kx)) = strided(x, kx);
  pts.bottomRows(static_cast<Eigen::Index>(ky)) = strided(y, ky);
  std::vector<double> dist;
  dist.reserve(pts.rows() * (pts.rows() - 1) / 2);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < pts.rows(); ++j) dist.push_back((pts.row(i) - pts.row(j)).norm());
  }
  if (dist.empty()) return 0.0;
  const std::size_t mid = dist.size() / 2;
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid), dist.end());
  double med = dist[mid];
  if (dist.size() % 2 == 0) {
    med = 0.5 * (med + *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return med;
}

double MmdResult::unsquared() const { return std::sqrt(squared); }

MmdResult mmd_detailed(const ResponseMatrix& x, const ResponseMatrix& y,
                       std::optional<double> kernel_bandwidth) {
  require_same_dims(x, y);
  MmdResult out;
  if (kernel_bandwidth) {
    if (!(*kernel_bandwidth > 0.0)) {
      throw Error(ErrorCode::kDegenerateBandwidth, "MMD kernel bandwidth must be > 0");
    }
    out.bandwidth = *kernel_bandwidth;
  } else {
    out.bandwidth = median_heuristic_bandwidth(x, y);
    if (!(out.bandwidth > 0.0)) {
      throw Error(ErrorCode::kDegenerateBandwidth,
                  "median pairwise distance is 0; pass an explicit MMD bandwidth");
    }
  }
  const double scale = 1.0 / (2.0 * out.bandwidth * out.bandwidth);
  const double n = static_cast<double>(x.size());
  const double m = static_cast<double>(y.size());
  const double kxx = kernel_sum(x.values(), x.values(), scale) / (n * n);
  const double kyy = kernel_sum(y.values(), y.values(), scale) / (m * m);
  // Average both orientations of the cross term so the estimate is exactly
  // symmetric in (X, Y) up to the final additions.
  const double kxy = 0.5 * (kernel_sum(x.values(), y.values(), scale) +
                            kernel_sum(y.values(), x.values(), scale)) / (n * m);
  out.squared = std::max(0.0, (kxx + kyy) - 2.0 * kxy);
  return out;
}

double mmd(const ResponseMatrix& x, const ResponseMatrix& y, std::optional<double> kernel_bandwidth) {
  return mmd_detailed(x, y, kernel_bandwidth).squared;
}

CorrelationMatrix pearson_corr_matrix(const ResponseMatrix& x) {
  if (x.size() < 2) throw Error(ErrorCode::kInsufficientSamples, "Pearson correlation needs N >= 2");
  const Eigen::Index d = x.dims();
  const Eigen::MatrixXd centered = x.values().rowwise() - column_means(x.values());
  const Eigen::MatrixXd cross = centered.transpose() * centered;
  CorrelationMatrix out;
  out.values.resize(d, d);
  std::vector<bool> constant(static_cast<std::size_t>(d));
  for (Eigen::Index k = 0; k < d; ++k) {
    const auto col = x.values().col(k);
    constant[static_cast<std::size_t>(k)] = (col.array() == col(0)).all();
    if (constant[static_cast<std::size_t>(k)]) out.constant_columns.push_back(static_cast<std::size_t>(k));
  }
  for (Eigen::Index a = 0; a < d; ++a) {
    for (Eigen::Index b = 0; b < d; ++b) {
      if (constant[static_cast<std::size_t>(a)] || constant[static_cast<std::size_t>(b)]) {
        out.values(a, b) = std::nan("");
      } else if (a == b) {
        out.values(a, b) = 1.0;
      } else {
        const double r = cross(a, b) / std::sqrt(cross(a, a) * cross(b, b));
        out.values(a, b) = std::clamp(r, -1.0, 1.0);
      }
    }
  }
  return out;
}

double mae_corr(const ResponseMatrix& x, const ResponseMatrix& y) {
  require_same_dims(x, y);
  if (x.dims() < 2) throw Error(ErrorCode::kDimensionMismatch, "correlation MAE needs at least 2 items");
  const CorrelationMatrix cx = pearson_corr_matrix(x);
  const CorrelationMatrix cy = pearson_corr_matrix(y);
  for (const auto* c : {&cx, &cy}) {
    if (!c->fully_defined()) {
      throw Error(ErrorCode::kConstantColumn,
                  "item " + std::to_string(c->constant_columns.front()) + " is constant");
    }
  }
  double total = 0.0;
  std::size_t pairs = 0;
  for (Eigen::Index a = 0; a < x.dims(); ++a) {
    for (Eigen::Index b = a + 1; b < x.dims(); ++b) {
      total += std::abs(cx.values(a, b) - cy.values(a, b));
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

double MetricReport::mmd() const { return std::sqrt(mmd_squared); }

MetricReport compute_metric_report(const ResponseMatrix& x, const ResponseMatrix& y,
                                   std::size_t sw_projections, std::uint64_t sw_seed,
                                   std::optional<double> mmd_bandwidth) {
  MetricReport r;
  r.amw = amw(x, y);
  r.fd = frechet_distance(x, y);
  r.sw = sliced_wasserstein(x, y, sw_projections, sw_seed);
  const MmdResult m = mmd_detailed(x, y, mmd_bandwidth);
  r.mmd_squared = m.squared;
  if (x.dims() >= 2) {
    try {
      r.mae_corr = mae_corr(x, y);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kConstantColumn) throw;
    }
  }
  r.n = x.size();
  r.m = y.size();
  r.settings = {m.bandwidth, sw_projections, sw_seed};
  return r;
}

}  // namespace persalign
