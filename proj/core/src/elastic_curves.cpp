#include <sgm/elastic_curves.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <sgm/error.hpp>

namespace sgm {
namespace {

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw invalid_input(std::string(what) + " contains non-finite values");
}

double grid_step(Eigen::Index samples) { return 1.0 / static_cast<double>(samples - 1); }

// Finite-difference derivative along rows with spacing h: central in the
// interior, one-sided at both ends.
Matrix row_gradient(const Matrix& f, double h) {
  const Eigen::Index n = f.rows();
  Matrix d(n, f.cols());
  if (n == 1) {
    d.setZero();
    return d;
  }
  d.row(0) = (f.row(1) - f.row(0)) / h;
  d.row(n - 1) = (f.row(n - 1) - f.row(n - 2)) / h;
  for (Eigen::Index i = 1; i + 1 < n; ++i) d.row(i) = (f.row(i + 1) - f.row(i - 1)) / (2.0 * h);
  return d;
}

// Admissible DP moves (steps along q1, steps along q2), gcd-reduced with
// components in {1, 2, 3}.
constexpr std::array<std::array<int, 2>, 7> kSlopes = {{
    {1, 1}, {1, 2}, {2, 1}, {1, 3}, {3, 1}, {2, 3}, {3, 2},
}};

struct DpResult {
  double cost = 0.0;
  std::vector<std::array<int, 2>> path;  // grid vertices from (0,0) to (T-1,T-1)
};

// Minimizes the discretized integral of |q1(t) - sqrt(gamma') q2(gamma(t))|^2
// over piecewise-linear gamma whose pieces use kSlopes. Each piece is
// integrated with the trapezoidal rule on the q1 grid, so along the identity
// path the cost equals the trapezoidal L2 distance exactly.
DpResult warp_dp(const SrvfCurve& q1, const SrvfCurve& q2) {
  const int n = static_cast<int>(q1.size());
  const int k = static_cast<int>(q1.dim());
  const double h = grid_step(n);

  // Row-major copies for cache-friendly sample access.
  std::vector<double> a(static_cast<std::size_t>(n) * k), b(static_cast<std::size_t>(n) * k);
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < k; ++d) {
      a[static_cast<std::size_t>(i) * k + d] = q1.values()(i, d);
      b[static_cast<std::size_t>(i) * k + d] = q2.values()(i, d);
    }
  }

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> cost(static_cast<std::size_t>(n) * n, kInf);
  std::vector<signed char> move(static_cast<std::size_t>(n) * n, -1);
  auto at = [n](int i, int j) { return static_cast<std::size_t>(i) * n + j; };
  cost[at(0, 0)] = 0.0;

  auto segment_cost = [&](int i0, int j0, int di, int dj) {
    const double slope = static_cast<double>(dj) / di;
    const double root = std::sqrt(slope);
    double total = 0.0;
    for (int s = 0; s <= di; ++s) {
      const int ti = i0 + s;
      const double pos = j0 + slope * s;
      const int lo = std::min(static_cast<int>(pos), n - 1);
      const int hi = std::min(lo + 1, n - 1);
      const double frac = pos - lo;
      double sq = 0.0;
      for (int d = 0; d < k; ++d) {
        const double v2 = (1.0 - frac) * b[static_cast<std::size_t>(lo) * k + d] +
                          frac * b[static_cast<std::size_t>(hi) * k + d];
        const double diff = a[static_cast<std::size_t>(ti) * k + d] - root * v2;
        sq += diff * diff;
      }
      total += (s == 0 || s == di) ? 0.5 * sq : sq;
    }
    return total * h;
  };

  for (int i = 1; i < n; ++i) {
    for (int j = 1; j < n; ++j) {
      double best = kInf;
      signed char best_move = -1;
      for (std::size_t m = 0; m < kSlopes.size(); ++m) {
        const int i0 = i - kSlopes[m][0];
        const int j0 = j - kSlopes[m][1];
        if (i0 < 0 || j0 < 0) continue;
        const double prev = cost[at(i0, j0)];
        if (prev == kInf) continue;
        const double c = prev + segment_cost(i0, j0, kSlopes[m][0], kSlopes[m][1]);
        if (c < best) {
          best = c;
          best_move = static_cast<signed char>(m);
        }
      }
      cost[at(i, j)] = best;
      move[at(i, j)] = best_move;
    }
  }

  DpResult result;
  result.cost = cost[at(n - 1, n - 1)];
  int i = n - 1, j = n - 1;
  result.path.push_back({i, j});
  while (i > 0 || j > 0) {
    const signed char m = move[at(i, j)];
    if (m < 0) throw solver_failure("elastic DP failed to reach the grid origin");
    i -= kSlopes[static_cast<std::size_t>(m)][0];
    j -= kSlopes[static_cast<std::size_t>(m)][1];
    result.path.push_back({i, j});
  }
  std::reverse(result.path.begin(), result.path.end());
  return result;
}

// Local refinement of a DP warping. The DP restricts pieces to a handful of
// slopes, which leaves a residual of several percent even between a curve and
// its own reparametrization. Here gamma is relaxed to arbitrary non-decreasing
// piecewise-linear maps with knots every `stride` samples, coarse to fine, by
// coordinate search on each knot. Each cell is costed with the same trapezoid
// as a one-step DP piece, so the result never exceeds the DP cost.
double refine_warping(const SrvfCurve& q1, const SrvfCurve& q2, Vector& gamma, int sweeps) {
  const int n = static_cast<int>(q1.size());
  const int k = static_cast<int>(q1.dim());
  const double h = grid_step(n);
  const double last = static_cast<double>(n - 1);

  std::vector<double> a(static_cast<std::size_t>(n) * k), b(static_cast<std::size_t>(n) * k);
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < k; ++d) {
      a[static_cast<std::size_t>(i) * k + d] = q1.values()(i, d);
      b[static_cast<std::size_t>(i) * k + d] = q2.values()(i, d);
    }
  }
  // |q1(t_i) - root * q2(x)|^2 with q2 linearly interpolated.
  auto residual = [&](int i, double x, double root) {
    const double pos = std::clamp(x, 0.0, 1.0) * last;
    const int lo = std::min(static_cast<int>(pos), n - 1);
    const int hi = std::min(lo + 1, n - 1);
    const double frac = pos - lo;
    double sq = 0.0;
    for (int d = 0; d < k; ++d) {
      const double v2 = (1.0 - frac) * b[static_cast<std::size_t>(lo) * k + d] + frac * b[static_cast<std::size_t>(hi) * k + d];
      const double diff = a[static_cast<std::size_t>(i) * k + d] - root * v2;
      sq += diff * diff;
    }
    return sq;
  };
  auto cell = [&](int i, double g0, double g1) {
    const double root = std::sqrt(std::max(g1 - g0, 0.0) / h);
    return 0.5 * h * (residual(i, g0, root) + residual(i + 1, g1, root));
  };
  auto total = [&](const Vector& g) {
    double c = 0.0;
    for (int i = 0; i + 1 < n; ++i) c += cell(i, g(i), g(i + 1));
    return c;
  };

  double best_cost = total(gamma);
  for (const int stride : {16, 8, 4, 2, 1}) {
    std::vector<int> knots;
    for (int i = 0; i < n - 1; i += stride) knots.push_back(i);
    knots.push_back(n - 1);
    if (knots.size() < 3) continue;
    std::vector<double> kv(knots.size());
    for (std::size_t m = 0; m < knots.size(); ++m) kv[m] = gamma(knots[m]);

    // Cost of the cells between knots m-1 and m+1 with knot m moved to x.
    auto local = [&](std::size_t m, double x) {
      double c = 0.0;
      for (std::size_t s = m - 1; s <= m; ++s) {
        const int i0 = knots[s], i1 = knots[s + 1];
        const double v0 = s == m ? x : kv[s];
        const double v1 = s + 1 == m ? x : kv[s + 1];
        const double step = (v1 - v0) / (i1 - i0);
        for (int i = i0; i < i1; ++i) c += cell(i, v0 + step * (i - i0), v0 + step * (i + 1 - i0));
      }
      return c;
    };

    constexpr int kScan = 6;
    constexpr int kGolden = 14;
    constexpr double kRatio = 0.6180339887498949;
    for (int sweep = 0; sweep < sweeps; ++sweep) {
      double moved = 0.0;
      for (std::size_t m = 1; m + 1 < knots.size(); ++m) {
        const double lo = kv[m - 1], hi = kv[m + 1];
        const double width = (hi - lo) / kScan;
        double x_best = kv[m];
        double f_best = local(m, x_best);
        for (int s = 0; s <= kScan; ++s) {
          const double x = lo + width * s;
          const double f = local(m, x);
          if (f < f_best) {
            f_best = f;
            x_best = x;
          }
        }
        double left = std::max(lo, x_best - width), right = std::min(hi, x_best + width);
        double x1 = right - kRatio * (right - left), x2 = left + kRatio * (right - left);
        double f1 = local(m, x1), f2 = local(m, x2);
        for (int it = 0; it < kGolden; ++it) {
          if (f1 < f2) {
            right = x2;
            x2 = x1;
            f2 = f1;
            x1 = right - kRatio * (right - left);
            f1 = local(m, x1);
          } else {
            left = x1;
            x1 = x2;
            f1 = f2;
            x2 = left + kRatio * (right - left);
            f2 = local(m, x2);
          }
        }
        if (f1 < f_best) {
          f_best = f1;
          x_best = x1;
        }
        if (f2 < f_best) x_best = x2;
        x_best = std::clamp(x_best, lo, hi);
        moved = std::max(moved, std::abs(x_best - kv[m]));
        kv[m] = x_best;
      }
      if (moved < 1e-3 * h) break;
    }

    Vector candidate(n);
    for (std::size_t s = 0; s + 1 < knots.size(); ++s) {
      const int i0 = knots[s], i1 = knots[s + 1];
      for (int i = i0; i <= i1; ++i)
        candidate(i) = std::clamp(kv[s] + (kv[s + 1] - kv[s]) * (i - i0) / (i1 - i0), kv[s], kv[s + 1]);
    }
    candidate(0) = 0.0;
    candidate(n - 1) = 1.0;
    const double c = total(candidate);
    if (c < best_cost) {
      best_cost = c;
      gamma = std::move(candidate);
    }
  }
  return best_cost;
}

Warping path_to_warping(const std::vector<std::array<int, 2>>& path, Eigen::Index samples) {
  Vector gamma(samples);
  const double scale = grid_step(samples);
  for (std::size_t p = 0; p + 1 < path.size(); ++p) {
    const auto [i0, j0] = path[p];
    const auto [i1, j1] = path[p + 1];
    for (int i = i0; i <= i1; ++i) {
      const double j = j0 + static_cast<double>(j1 - j0) * (i - i0) / (i1 - i0);
      gamma(i) = j * scale;
    }
  }
  gamma(0) = 0.0;
  gamma(samples - 1) = 1.0;
  return Warping(std::move(gamma));
}

void require_compatible(const SrvfCurve& q1, const SrvfCurve& q2) {
  if (q1.dim() != q2.dim()) throw invalid_input("SRVF dimension mismatch");
  if (q1.size() != q2.size()) throw invalid_input("SRVF sample counts differ; resample to a common grid first");
  if (q1.size() < 2) throw invalid_input("SRVF needs at least two samples");
}

}  // namespace

Curve::Curve(Matrix points) : points_(std::move(points)) {}

SrvfCurve::SrvfCurve(Matrix q) : q_(std::move(q)) {}

SrvfCurve SrvfCurve::null(Eigen::Index samples, Eigen::Index dim) {
  return SrvfCurve(Matrix::Zero(samples, dim));
}

Warping::Warping(Vector gamma) : gamma_(std::move(gamma)) {}

Warping Warping::identity(Eigen::Index samples) {
  return Warping(Vector::LinSpaced(samples, 0.0, 1.0));
}

Curve resample_by_arclength(const Matrix& points, Eigen::Index samples) {
  if (points.rows() < 2) throw invalid_input("a curve needs at least two points");
  if (samples < 2) throw invalid_input("resampling needs at least two samples");
  require_finite(points, "curve");

  const Eigen::Index n = points.rows();
  std::vector<double> arc(static_cast<std::size_t>(n), 0.0);
  for (Eigen::Index i = 1; i < n; ++i)
    arc[static_cast<std::size_t>(i)] = arc[static_cast<std::size_t>(i - 1)] + (points.row(i) - points.row(i - 1)).norm();
  const double length = arc.back();

  Matrix out(samples, points.cols());
  if (length == 0.0) {
    for (Eigen::Index i = 0; i < samples; ++i) out.row(i) = points.row(0);
    return Curve(std::move(out));
  }
  Eigen::Index seg = 0;
  for (Eigen::Index i = 0; i < samples; ++i) {
    const double s = length * static_cast<double>(i) / static_cast<double>(samples - 1);
    while (seg + 2 < n && arc[static_cast<std::size_t>(seg + 1)] < s) ++seg;
    const double s0 = arc[static_cast<std::size_t>(seg)];
    const double s1 = arc[static_cast<std::size_t>(seg + 1)];
    const double w = s1 > s0 ? std::clamp((s - s0) / (s1 - s0), 0.0, 1.0) : 0.0;
    out.row(i) = (1.0 - w) * points.row(seg) + w * points.row(seg + 1);
  }
  out.row(0) = points.row(0);
  out.row(samples - 1) = points.row(n - 1);
  return Curve(std::move(out));
}

SrvfCurve srvf_transform(const Curve& curve) {
  if (curve.size() < 2) throw invalid_input("SRVF transform needs at least two samples");
  require_finite(curve.points(), "curve");
  const Matrix velocity = row_gradient(curve.points(), grid_step(curve.size()));
  Matrix q(velocity.rows(), velocity.cols());
  for (Eigen::Index i = 0; i < velocity.rows(); ++i) {
    const double speed = velocity.row(i).norm();
    if (speed > 0.0)
      q.row(i) = velocity.row(i) / std::sqrt(speed);
    else
      q.row(i).setZero();
  }
  return SrvfCurve(std::move(q));
}

Curve srvf_inverse(const SrvfCurve& q, const Vector& origin) {
  require_finite(q.values(), "SRVF");
  require_finite(origin, "origin");
  if (origin.size() != q.dim()) throw invalid_input("origin dimension does not match SRVF dimension");
  const Eigen::Index n = q.size();
  Matrix velocity(n, q.dim());
  for (Eigen::Index i = 0; i < n; ++i) velocity.row(i) = q.values().row(i) * q.values().row(i).norm();

  Matrix points(n, q.dim());
  points.row(0) = origin.transpose();
  const double h = n > 1 ? grid_step(n) : 0.0;
  for (Eigen::Index i = 1; i < n; ++i)
    points.row(i) = points.row(i - 1) + 0.5 * h * (velocity.row(i - 1) + velocity.row(i));
  return Curve(std::move(points));
}

SrvfCurve apply_warping(const SrvfCurve& q, const Warping& gamma) {
  const Eigen::Index n = q.size();
  if (gamma.size() != n) throw invalid_input("warping grid does not match SRVF grid");
  const Vector& g = gamma.values();
  if (!g.allFinite()) throw invalid_input("warping contains non-finite values");
  if (g(0) != 0.0 || g(n - 1) != 1.0) throw invalid_input("invalid warping: boundary values must be 0 and 1");
  for (Eigen::Index i = 1; i < n; ++i)
    if (g(i) < g(i - 1)) throw invalid_input("invalid warping: gamma must be non-decreasing");

  const Matrix slope = row_gradient(Matrix(g), grid_step(n));
  Matrix out(n, q.dim());
  const double last = static_cast<double>(n - 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double pos = std::clamp(g(i), 0.0, 1.0) * last;
    const Eigen::Index lo = std::min<Eigen::Index>(static_cast<Eigen::Index>(pos), n - 1);
    const Eigen::Index hi = std::min<Eigen::Index>(lo + 1, n - 1);
    const double frac = pos - static_cast<double>(lo);
    out.row(i) = std::sqrt(std::max(slope(i, 0), 0.0)) *
                 ((1.0 - frac) * q.values().row(lo) + frac * q.values().row(hi));
  }
  return SrvfCurve(std::move(out));
}

SrvfCurve reverse(const SrvfCurve& q) { return SrvfCurve(-q.values().colwise().reverse()); }

double l2_inner(const SrvfCurve& a, const SrvfCurve& b) {
  if (a.size() != b.size() || a.dim() != b.dim()) throw invalid_input("SRVF shape mismatch in inner product");
  const Eigen::Index n = a.size();
  if (n < 2) return 0.0;
  const Vector pointwise = (a.values().array() * b.values().array()).rowwise().sum();
  return grid_step(n) * (pointwise.sum() - 0.5 * (pointwise(0) + pointwise(n - 1)));
}

double l2_norm(const SrvfCurve& q) { return std::sqrt(std::max(l2_inner(q, q), 0.0)); }

double l2_distance(const SrvfCurve& a, const SrvfCurve& b) {
  if (a.size() != b.size() || a.dim() != b.dim()) throw invalid_input("SRVF shape mismatch in distance");
  return l2_norm(SrvfCurve(a.values() - b.values()));
}

ElasticMatch elastic_match(const SrvfCurve& q1, const SrvfCurve& q2, const ElasticOptions& options) {
  require_compatible(q1, q2);
  const DpResult forward = warp_dp(q1, q2);
  ElasticMatch match;
  Vector gamma = path_to_warping(forward.path, q1.size()).values();
  double cost = forward.cost;
  if (options.refine_sweeps > 0) cost = std::min(cost, refine_warping(q1, q2, gamma, options.refine_sweeps));
  match.distance = std::sqrt(std::max(cost, 0.0));
  match.gamma = Warping(std::move(gamma));
  match.warped = apply_warping(q2, match.gamma);
  if (options.symmetric) {
    ElasticOptions one_way = options;
    one_way.symmetric = false;
    match.distance = std::min(match.distance, elastic_match(q2, q1, one_way).distance);
  }
  return match;
}

double shape_distance(const SrvfCurve& q1, const SrvfCurve& q2, const ElasticOptions& options) {
  return elastic_match(q1, q2, options).distance;
}

double edge_distance(const SrvfCurve& e1, const SrvfCurve& e2, const ElasticOptions& options) {
  return std::min(shape_distance(e1, e2, options), shape_distance(reverse(e1), e2, options));
}

SrvfCurve interpolate_aligned(const SrvfCurve& q1, const SrvfCurve& q2_aligned, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw invalid_input("geodesic time must lie in [0, 1]");
  if (q1.size() != q2_aligned.size() || q1.dim() != q2_aligned.dim())
    throw invalid_input("SRVF shape mismatch in geodesic");
  return SrvfCurve((1.0 - t) * q1.values() + t * q2_aligned.values());
}

SrvfCurve curve_geodesic(const SrvfCurve& q1, const SrvfCurve& q2, double t, const ElasticOptions& options) {
  if (!(t >= 0.0 && t <= 1.0)) throw invalid_input("geodesic time must lie in [0, 1]");
  const ElasticMatch match = elastic_match(q1, q2, options);
  return interpolate_aligned(q1, match.warped, t);
}

}  // namespace sgm
