#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <vector>

#include "sdfsc/common.hpp"

namespace sdfsc {

enum class ShapeKind { Sphere, Capsule, Box };

/// One convex collision primitive, posed in its owning link frame.
/// Capsule axis is local z by convention.
struct Primitive {
  ShapeKind kind = ShapeKind::Sphere;
  Eigen::Isometry3d pose = Eigen::Isometry3d::Identity();  // link -> primitive
  double radius = 0.0;        // sphere, capsule
  double half_length = 0.0;   // capsule
  Eigen::Vector3d half_extents = Eigen::Vector3d::Zero();  // box

  static Primitive sphere(double r, const Eigen::Vector3d& center = Eigen::Vector3d::Zero()) {
    Primitive p;
    p.kind = ShapeKind::Sphere;
    p.radius = r;
    p.pose.translation() = center;
    return p;
  }
  static Primitive capsule(double r, double half_len,
                           const Eigen::Isometry3d& pose = Eigen::Isometry3d::Identity()) {
    Primitive p;
    p.kind = ShapeKind::Capsule;
    p.radius = r;
    p.half_length = half_len;
    p.pose = pose;
    return p;
  }
  static Primitive box(const Eigen::Vector3d& half_extents,
                       const Eigen::Isometry3d& pose = Eigen::Isometry3d::Identity()) {
    Primitive p;
    p.kind = ShapeKind::Box;
    p.half_extents = half_extents;
    p.pose = pose;
    return p;
  }

  bool dims_positive() const {
    switch (kind) {
      case ShapeKind::Sphere: return radius > 0.0;
      case ShapeKind::Capsule: return radius > 0.0 && half_length > 0.0;
      case ShapeKind::Box: return (half_extents.array() > 0.0).all();
    }
    return false;
  }
};

/// Collision geometry of one link: a union of convex primitives.
struct LinkShape {
  std::vector<Primitive> primitives;
};

// Exact signed distance to a single primitive. p is in the owning link frame;
// negative inside.
inline double primitive_sdf(const Primitive& prim, const Eigen::Vector3d& p_link) {
  const Eigen::Vector3d p = prim.pose.inverse() * p_link;
  switch (prim.kind) {
    case ShapeKind::Sphere:
      return p.norm() - prim.radius;
    case ShapeKind::Capsule: {
      const double z = std::clamp(p.z(), -prim.half_length, prim.half_length);
      return Eigen::Vector3d(p.x(), p.y(), p.z() - z).norm() - prim.radius;
    }
    case ShapeKind::Box: {
      const Eigen::Vector3d q = p.cwiseAbs() - prim.half_extents;
      const double outside = q.cwiseMax(0.0).norm();
      const double inside = std::min(q.maxCoeff(), 0.0);
      return outside + inside;
    }
  }
  return 0.0;
}

// Union signed distance of a link: min over its primitives. Exact outside the
// union, conservative (an upper bound on penetration depth) inside.
inline double link_sdf(const LinkShape& link, const Eigen::Vector3d& p_link) {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& prim : link.primitives) d = std::min(d, primitive_sdf(prim, p_link));
  return d;
}

namespace detail {

// Distance between segments (p1,q1) and (p2,q2); Ericson's clamped
// closest-point scheme, robust for degenerate and parallel segments.
inline double segment_segment_distance(const Eigen::Vector3d& p1, const Eigen::Vector3d& q1,
                                       const Eigen::Vector3d& p2, const Eigen::Vector3d& q2) {
  constexpr double kEps = 1e-14;
  const Eigen::Vector3d d1 = q1 - p1;
  const Eigen::Vector3d d2 = q2 - p2;
  const Eigen::Vector3d r = p1 - p2;
  const double a = d1.dot(d1);
  const double e = d2.dot(d2);
  const double f = d2.dot(r);
  double s = 0.0, t = 0.0;
  if (a <= kEps && e <= kEps) {
    // both segments are points
  } else if (a <= kEps) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= kEps) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      s = denom > kEps ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  return ((p1 + s * d1) - (p2 + t * d2)).norm();
}

inline void capsule_segment_world(const Primitive& prim, const Eigen::Isometry3d& link_to_world,
                                  Eigen::Vector3d& e0, Eigen::Vector3d& e1) {
  const Eigen::Isometry3d world_pose = link_to_world * prim.pose;
  const Eigen::Vector3d axis = world_pose.linear().col(2);
  const Eigen::Vector3d c = world_pose.translation();
  e0 = c - prim.half_length * axis;
  e1 = c + prim.half_length * axis;
}

// Signed box SDF evaluated at a world point, box posed by (link_to_world * pose).
inline double box_sdf_world(const Primitive& box, const Eigen::Isometry3d& link_to_world,
                            const Eigen::Vector3d& p_world) {
  const Eigen::Isometry3d world_pose = link_to_world * box.pose;
  const Eigen::Vector3d p = world_pose.inverse() * p_world;
  const Eigen::Vector3d q = p.cwiseAbs() - box.half_extents;
  return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
}

// min over t in [0,1] of f(t) via golden-section refinement around the best
// coarse sample. Used for capsule-vs-box clearance.
template <typename F>
double minimize_1d(F&& f) {
  constexpr int kCoarse = 64;
  double best_t = 0.0, best_f = f(0.0);
  for (int i = 1; i <= kCoarse; ++i) {
    const double t = static_cast<double>(i) / kCoarse;
    const double v = f(t);
    if (v < best_f) {
      best_f = v;
      best_t = t;
    }
  }
  double lo = std::max(0.0, best_t - 1.0 / kCoarse);
  double hi = std::min(1.0, best_t + 1.0 / kCoarse);
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 80; ++it) {
    if (f1 < f2) {
      hi = x2; x2 = x1; f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1; x1 = x2; f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = f(x2);
    }
  }
  return std::min(std::min(f1, f2), best_f);
}

}  // namespace detail

// Signed clearance between two posed primitives (world poses given by each
// link's base transform). Sphere/capsule pairs and anything-vs-box are closed
// form or numerically tight; box-box is not supported.
inline double primitive_pair_clearance(const Primitive& a, const Eigen::Isometry3d& a_link_to_world,
                                       const Primitive& b, const Eigen::Isometry3d& b_link_to_world) {
  using detail::box_sdf_world;
  using detail::capsule_segment_world;
  using detail::minimize_1d;
  using detail::segment_segment_distance;

  auto center = [](const Primitive& p, const Eigen::Isometry3d& tf) {
    return Eigen::Vector3d((tf * p.pose).translation());
  };

  const bool a_box = a.kind == ShapeKind::Box;
  const bool b_box = b.kind == ShapeKind::Box;
  if (a_box && b_box)
    throw ModelError("primitive_pair_clearance: box-box pairs are not supported");
  if (a_box) return primitive_pair_clearance(b, b_link_to_world, a, a_link_to_world);

  // a is sphere or capsule: reduce to (segment or point) vs b.
  Eigen::Vector3d a0 = center(a, a_link_to_world), a1 = a0;
  if (a.kind == ShapeKind::Capsule) capsule_segment_world(a, a_link_to_world, a0, a1);

  if (b_box) {
    auto f = [&](double t) {
      return box_sdf_world(b, b_link_to_world, a0 + t * (a1 - a0));
    };
    const double d = (a.kind == ShapeKind::Sphere) ? f(0.0) : minimize_1d(f);
    return d - a.radius;
  }

  Eigen::Vector3d b0 = center(b, b_link_to_world), b1 = b0;
  if (b.kind == ShapeKind::Capsule) capsule_segment_world(b, b_link_to_world, b0, b1);
  return segment_segment_distance(a0, a1, b0, b1) - a.radius - b.radius;
}

}  // namespace sdfsc
