#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "sdfsc/common.hpp"
#include "sdfsc/shapes.hpp"

namespace sdfsc {

enum class JointType { Revolute, Prismatic, Fixed };

// Two supported chain parameterizations, declared per model file so a model
// is unambiguous:
//   Standard:  A = Rz(theta) Tz(d) Tx(a) Rx(alpha)
//   Modified:  A = Rx(alpha) Tx(a) Rz(theta) Tz(d)   (Craig)
enum class DhConvention { Standard, Modified };

struct DhRow {
  double a = 0.0;            // link length [m]
  double alpha = 0.0;        // link twist [rad]
  double d = 0.0;            // link offset [m]
  double theta_offset = 0.0; // joint angle offset [rad]
  JointType type = JointType::Revolute;
};

/// Kinematic and geometric description of one serial arm. Immutable after
/// construction; the single source of geometric truth.
struct RobotModel {
  std::string name;
  DhConvention convention = DhConvention::Modified;
  std::vector<DhRow> chain;               // one row per link frame, K rows
  Eigen::VectorXd q_lower, q_upper;       // joint limits [rad], size n
  Eigen::VectorXd vel_limit;              // joint velocity limits [rad/s], size n
  std::vector<LinkShape> links;           // K entries, links[k-1] belongs to frame k
  std::vector<std::pair<int, int>> ignore_pairs;  // extra self-collision ignores (1-based frames)

  int dof() const { return static_cast<int>(q_lower.size()); }
  int link_count() const { return static_cast<int>(chain.size()); }

  // chain indices (0-based) of the movable joints, in order
  std::vector<int> movable_chain_indices() const {
    std::vector<int> idx;
    for (int e = 0; e < static_cast<int>(chain.size()); ++e)
      if (chain[e].type != JointType::Fixed) idx.push_back(e);
    return idx;
  }

  bool within_limits(const Eigen::VectorXd& q) const {
    return (q.array() >= q_lower.array()).all() && (q.array() <= q_upper.array()).all();
  }

  Eigen::VectorXd normalize_config(const Eigen::VectorXd& q) const {
    return (q - q_lower).cwiseQuotient(q_upper - q_lower);
  }
  Eigen::VectorXd denormalize_config(const Eigen::VectorXd& qn) const {
    return q_lower + qn.cwiseProduct(q_upper - q_lower);
  }

  // Throws ModelError naming the offending field when an invariant is broken.
  void validate() const {
    const int n = dof();
    const int K = link_count();
    if (n < 1) throw ModelError("robot '" + name + "': dof n must be >= 1");
    if (K < n) throw ModelError("robot '" + name + "': link count K must be >= n");
    if (static_cast<int>(movable_chain_indices().size()) != n)
      throw ModelError("robot '" + name + "': movable joint count does not match limits size");
    if (q_upper.size() != n || vel_limit.size() != n)
      throw ModelError("robot '" + name + "': joint_limits/velocity_limits size mismatch");
    for (int j = 0; j < n; ++j) {
      if (!(q_lower[j] < q_upper[j]))
        throw ModelError("robot '" + name + "': joint_limits[" + std::to_string(j) +
                         "] must satisfy lo < hi");
      if (!(vel_limit[j] > 0.0))
        throw ModelError("robot '" + name + "': velocity_limits[" + std::to_string(j) +
                         "] must be positive");
    }
    if (static_cast<int>(links.size()) != K)
      throw ModelError("robot '" + name + "': links list must have one entry per frame (K=" +
                       std::to_string(K) + ")");
    for (int k = 0; k < K; ++k) {
      if (links[k].primitives.empty())
        throw ModelError("robot '" + name + "': links[" + std::to_string(k + 1) +
                         "] owns no primitive shape");
      for (std::size_t s = 0; s < links[k].primitives.size(); ++s)
        if (!links[k].primitives[s].dims_positive())
          throw ModelError("robot '" + name + "': links[" + std::to_string(k + 1) + "].shapes[" +
                           std::to_string(s) + "] has non-positive dims");
    }
    for (const auto& [i, j] : ignore_pairs)
      if (i < 1 || i > K || j < 1 || j > K || i == j)
        throw ModelError("robot '" + name + "': ignore_pairs entry out of range");
  }
};

/// Base-to-link transforms for every frame of the chain at one configuration.
struct FrameSet {
  std::vector<Eigen::Isometry3d> transforms;  // transforms[k-1] = T_k, k = 1..K
  bool within_limits = true;                  // soft flag, out-of-limit q is still computed

  const Eigen::Isometry3d& link(int k) const { return transforms[k - 1]; }
  int count() const { return static_cast<int>(transforms.size()); }
};

namespace detail {

// Joint transform for one chain row at joint value q (ignored for fixed rows).
inline Eigen::Isometry3d dh_transform(const DhRow& row, DhConvention conv, double q) {
  const double theta = row.theta_offset + (row.type == JointType::Revolute ? q : 0.0);
  const double d = row.d + (row.type == JointType::Prismatic ? q : 0.0);
  const double ct = std::cos(theta), st = std::sin(theta);
  const double ca = std::cos(row.alpha), sa = std::sin(row.alpha);
  Eigen::Matrix4d m;
  if (conv == DhConvention::Standard) {
    m << ct, -st * ca, st * sa, row.a * ct,
         st, ct * ca, -ct * sa, row.a * st,
         0.0, sa, ca, d,
         0.0, 0.0, 0.0, 1.0;
  } else {
    m << ct, -st, 0.0, row.a,
         st * ca, ct * ca, -sa, -d * sa,
         st * sa, ct * sa, ca, d * ca,
         0.0, 0.0, 0.0, 1.0;
  }
  Eigen::Isometry3d iso;
  iso.matrix() = m;
  return iso;
}

// d(dh_transform)/dq for a movable row, as a dense 4x4.
inline Eigen::Matrix4d dh_transform_derivative(const DhRow& row, DhConvention conv, double q) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
  if (row.type == JointType::Revolute) {
    const double theta = row.theta_offset + q;
    const double ct = std::cos(theta), st = std::sin(theta);
    const double ca = std::cos(row.alpha), sa = std::sin(row.alpha);
    if (conv == DhConvention::Standard) {
      m << -st, -ct * ca, ct * sa, -row.a * st,
           ct, -st * ca, st * sa, row.a * ct,
           0.0, 0.0, 0.0, 0.0,
           0.0, 0.0, 0.0, 0.0;
    } else {
      m << -st, -ct, 0.0, 0.0,
           ct * ca, -st * ca, 0.0, 0.0,
           ct * sa, -st * sa, 0.0, 0.0,
           0.0, 0.0, 0.0, 0.0;
    }
  } else if (row.type == JointType::Prismatic) {
    if (conv == DhConvention::Standard) {
      m(2, 3) = 1.0;
    } else {
      const double ca = std::cos(row.alpha), sa = std::sin(row.alpha);
      m(1, 3) = -sa;
      m(2, 3) = ca;
    }
  }
  return m;
}

}  // namespace detail

inline FrameSet forward_frames(const RobotModel& model, const Eigen::VectorXd& q) {
  FrameSet out;
  out.transforms.reserve(model.chain.size());
  out.within_limits = model.within_limits(q);
  Eigen::Isometry3d T = Eigen::Isometry3d::Identity();
  int j = 0;
  for (const auto& row : model.chain) {
    const double qe = row.type == JointType::Fixed ? 0.0 : q[j++];
    T = T * detail::dh_transform(row, model.convention, qe);
    out.transforms.push_back(T);
  }
  return out;
}

// p expressed in link-k coordinates, using the rigid inverse (R^T, -R^T t).
inline Eigen::Vector3d to_link_frame(const FrameSet& frames, const Eigen::Vector3d& p, int k) {
  const Eigen::Isometry3d& T = frames.link(k);
  return T.linear().transpose() * (p - T.translation());
}

inline Eigen::Vector3d from_link_frame(const FrameSet& frames, const Eigen::Vector3d& p_k, int k) {
  const Eigen::Isometry3d& T = frames.link(k);
  return T.linear() * p_k + T.translation();
}

/// Analytic derivatives dT_k/dq_j of every frame wrt every joint.
struct FrameDerivatives {
  // d[k-1][j] = dT_k/dq_j as a 4x4 (zero when joint j sits past frame k)
  std::vector<std::vector<Eigen::Matrix4d>> d;

  const Eigen::Matrix4d& of(int k, int j) const { return d[k - 1][j]; }
  Eigen::Matrix3d rotation(int k, int j) const { return d[k - 1][j].topLeftCorner<3, 3>(); }
  Eigen::Vector3d translation(int k, int j) const { return d[k - 1][j].topRightCorner<3, 1>(); }
};

inline FrameDerivatives frame_derivatives(const RobotModel& model, const Eigen::VectorXd& q) {
  const int K = model.link_count();
  const int n = model.dof();
  const auto movable = model.movable_chain_indices();

  // per-entry local transforms and their prefix products
  std::vector<Eigen::Matrix4d> A(K);
  std::vector<Eigen::Matrix4d> prefix(K + 1);
  prefix[0] = Eigen::Matrix4d::Identity();
  {
    int j = 0;
    for (int e = 0; e < K; ++e) {
      const double qe = model.chain[e].type == JointType::Fixed ? 0.0 : q[j++];
      A[e] = detail::dh_transform(model.chain[e], model.convention, qe).matrix();
      prefix[e + 1] = prefix[e] * A[e];
    }
  }

  FrameDerivatives out;
  out.d.assign(K, std::vector<Eigen::Matrix4d>(n, Eigen::Matrix4d::Zero()));
  for (int j = 0; j < n; ++j) {
    const int e = movable[j];
    const Eigen::Matrix4d dA = detail::dh_transform_derivative(model.chain[e], model.convention, q[j]);
    Eigen::Matrix4d running = prefix[e] * dA;  // = dT_{e+1}/dq_j
    out.d[e][j] = running;
    for (int k = e + 1; k < K; ++k) {
      running = running * A[k];
      out.d[k][j] = running;
    }
  }
  return out;
}

namespace detail {

// Axis direction and a point on the axis for the joint at chain entry e
// (0-based). Standard DH actuates about z of the previous frame, modified DH
// about z of the joint's own frame.
inline void joint_axis(const RobotModel& model, const FrameSet& frames, int e,
                       Eigen::Vector3d& z, Eigen::Vector3d& origin) {
  const int axis_frame = model.convention == DhConvention::Modified ? e + 1 : e;
  if (axis_frame == 0) {
    z = Eigen::Vector3d::UnitZ();
    origin.setZero();
  } else {
    const Eigen::Isometry3d& T = frames.link(axis_frame);
    z = T.linear().col(2);
    origin = T.translation();
  }
}

}  // namespace detail

// Classical geometric Jacobian of the frame origin: rows 0-2 translational,
// rows 3-5 angular. Columns of joints past the frame are zero.
inline Eigen::Matrix<double, 6, Eigen::Dynamic> geometric_jacobian(const RobotModel& model,
                                                                   const Eigen::VectorXd& q,
                                                                   int frame) {
  const int n = model.dof();
  const auto movable = model.movable_chain_indices();
  const FrameSet frames = forward_frames(model, q);
  Eigen::Matrix<double, 6, Eigen::Dynamic> J = Eigen::Matrix<double, 6, Eigen::Dynamic>::Zero(6, n);
  const Eigen::Vector3d o_target = frames.link(frame).translation();
  for (int j = 0; j < n; ++j) {
    const int e = movable[j];
    if (e + 1 > frame) break;  // joints past the queried frame contribute zero
    Eigen::Vector3d z, origin;
    detail::joint_axis(model, frames, e, z, origin);
    if (model.chain[e].type == JointType::Revolute) {
      J.block<3, 1>(0, j) = z.cross(o_target - origin);
      J.block<3, 1>(3, j) = z;
    } else {
      J.block<3, 1>(0, j) = z;
    }
  }
  return J;
}

// Translational Jacobian of a world point rigidly attached to `frame`.
inline Eigen::Matrix<double, 3, Eigen::Dynamic> point_jacobian(const RobotModel& model,
                                                               const FrameSet& frames,
                                                               int frame,
                                                               const Eigen::Vector3d& p_world) {
  const int n = model.dof();
  const auto movable = model.movable_chain_indices();
  Eigen::Matrix<double, 3, Eigen::Dynamic> J = Eigen::Matrix<double, 3, Eigen::Dynamic>::Zero(3, n);
  for (int j = 0; j < n; ++j) {
    const int e = movable[j];
    if (e + 1 > frame) break;
    Eigen::Vector3d z, origin;
    detail::joint_axis(model, frames, e, z, origin);
    if (model.chain[e].type == JointType::Revolute) {
      J.col(j) = z.cross(p_world - origin);
    } else {
      J.col(j) = z;
    }
  }
  return J;
}

struct ManipulabilityResult {
  double m = 0.0;
  Eigen::VectorXd gradient;  // dm/dq, finite-difference
  bool singular = false;     // m ~ 0; gradient fell back to one-sided differences
};

namespace detail {

inline double manipulability_value(const RobotModel& model, const Eigen::VectorXd& q) {
  const int K = model.link_count();
  const Eigen::Matrix<double, 6, Eigen::Dynamic> J = geometric_jacobian(model, q, K);
  const int n = model.dof();
  // Yoshikawa measure on the largest full-rank-capable block: the full 6xn
  // Jacobian when n >= 6, otherwise the translational rows.
  if (n >= 6) {
    const Eigen::MatrixXd JJt = J * J.transpose();
    return std::sqrt(std::max(0.0, JJt.determinant()));
  }
  const Eigen::MatrixXd Jv = J.topRows(3);
  if (n >= 3) {
    return std::sqrt(std::max(0.0, (Jv * Jv.transpose()).determinant()));
  }
  return std::sqrt(std::max(0.0, (Jv.transpose() * Jv).determinant()));
}

}  // namespace detail

// m = sqrt(det(J J^T)) with the gradient taken by central differences
// (h = 1e-6); singular configurations flag and fall back to one-sided steps.
inline ManipulabilityResult manipulability(const RobotModel& model, const Eigen::VectorXd& q) {
  constexpr double kH = 1e-6;
  ManipulabilityResult res;
  res.m = detail::manipulability_value(model, q);
  res.singular = res.m < 1e-12;
  const int n = model.dof();
  res.gradient.resize(n);
  Eigen::VectorXd qe = q;
  for (int j = 0; j < n; ++j) {
    if (res.singular) {
      qe[j] = q[j] + kH;
      const double mp = detail::manipulability_value(model, qe);
      res.gradient[j] = (mp - res.m) / kH;
    } else {
      qe[j] = q[j] + kH;
      const double mp = detail::manipulability_value(model, qe);
      qe[j] = q[j] - kH;
      const double mm = detail::manipulability_value(model, qe);
      res.gradient[j] = (mp - mm) / (2.0 * kH);
    }
    qe[j] = q[j];
  }
  return res;
}

}  // namespace sdfsc
