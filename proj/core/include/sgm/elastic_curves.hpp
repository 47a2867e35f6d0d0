#pragma once

// Elastic shape analysis of open curves: square-root velocity functions,
// reparametrization by warping functions and the elastic shape distance.

#include <sgm/types.hpp>

namespace sgm {

/// A sampled open curve in R^k, one row per sample, uniformly parameterized
/// on [0, 1].
class Curve {
 public:
  Curve() = default;
  explicit Curve(Matrix points);

  const Matrix& points() const { return points_; }
  Eigen::Index size() const { return points_.rows(); }
  Eigen::Index dim() const { return points_.cols(); }

 private:
  Matrix points_;
};

/// Square-root velocity representation q = b' / sqrt(|b'|) of a curve,
/// sampled on the grid t_i = i / (T - 1). The zero function is the null edge.
class SrvfCurve {
 public:
  SrvfCurve() = default;
  explicit SrvfCurve(Matrix q);

  static SrvfCurve null(Eigen::Index samples, Eigen::Index dim);

  const Matrix& values() const { return q_; }
  Eigen::Index size() const { return q_.rows(); }
  Eigen::Index dim() const { return q_.cols(); }
  bool is_null() const { return q_.isZero(0.0); }

 private:
  Matrix q_;
};

/// Non-decreasing map of [0, 1] onto itself sampled on the uniform grid.
class Warping {
 public:
  Warping() = default;
  explicit Warping(Vector gamma);

  static Warping identity(Eigen::Index samples);

  const Vector& values() const { return gamma_; }
  Eigen::Index size() const { return gamma_.size(); }

 private:
  Vector gamma_;
};

struct ElasticOptions {
  /// Minimize over both warping directions and keep the smaller distance.
  bool symmetric = false;
  /// Coordinate-search sweeps per resolution level polishing the DP warping;
  /// 0 keeps the raw DP result.
  int refine_sweeps = 4;
};

/// Result of aligning q2 onto q1.
struct ElasticMatch {
  double distance = 0.0;
  Warping gamma;
  SrvfCurve warped;  // (q2 o gamma) sqrt(gamma')
};

/// Resample a polyline at `samples` points equally spaced in arc length.
/// A zero-length polyline resamples to a constant curve.
Curve resample_by_arclength(const Matrix& points, Eigen::Index samples);

SrvfCurve srvf_transform(const Curve& curve);
Curve srvf_inverse(const SrvfCurve& q, const Vector& origin);
SrvfCurve apply_warping(const SrvfCurve& q, const Warping& gamma);

/// Orientation reversal b(1 - t): samples reversed and negated.
SrvfCurve reverse(const SrvfCurve& q);

// L2 quantities on [0, 1], trapezoidal rule.
double l2_inner(const SrvfCurve& a, const SrvfCurve& b);
double l2_norm(const SrvfCurve& q);
double l2_distance(const SrvfCurve& a, const SrvfCurve& b);

/// Dynamic-programming search for the warping of q2 that best matches q1.
ElasticMatch elastic_match(const SrvfCurve& q1, const SrvfCurve& q2, const ElasticOptions& options = {});

double shape_distance(const SrvfCurve& q1, const SrvfCurve& q2, const ElasticOptions& options = {});

/// Shape distance minimized over both orientations of e1.
double edge_distance(const SrvfCurve& e1, const SrvfCurve& e2, const ElasticOptions& options = {});

/// Point t on the SRVF-space straight line from q1 to the optimally warped q2.
SrvfCurve curve_geodesic(const SrvfCurve& q1, const SrvfCurve& q2, double t, const ElasticOptions& options = {});

/// Geodesic point for an already-aligned target.
SrvfCurve interpolate_aligned(const SrvfCurve& q1, const SrvfCurve& q2_aligned, double t);

}  // namespace sgm
