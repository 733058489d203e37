#pragma once

#include <Eigen/Dense>
#include <limits>
#include <vector>

#include "sdfsc/robot.hpp"
#include "sdfsc/shapes.hpp"

namespace sdfsc {

struct LinkDistanceResult {
  Eigen::VectorXd d;  // signed distance to each link, size K
  int argmin = 0;     // 1-based link index, ties broken by lowest k
};

// Analytic ground truth for the whole-arm signed distance of a world point:
// per-link union SDF evaluated in each link frame.
inline LinkDistanceResult link_distance_oracle(const RobotModel& model, const FrameSet& frames,
                                               const Eigen::Vector3d& p) {
  const int K = model.link_count();
  LinkDistanceResult res;
  res.d.resize(K);
  double best = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= K; ++k) {
    const Eigen::Vector3d pk = to_link_frame(frames, p, k);
    const double dk = link_sdf(model.links[k - 1], pk);
    res.d[k - 1] = dk;
    if (dk < best) {
      best = dk;
      res.argmin = k;
    }
  }
  return res;
}

inline double min_link_distance(const RobotModel& model, const FrameSet& frames,
                                const Eigen::Vector3d& p) {
  return link_distance_oracle(model, frames, p).d.minCoeff();
}

struct SelfCollisionResult {
  bool colliding = false;
  double clearance = std::numeric_limits<double>::infinity();  // min non-adjacent pair distance
  int link_a = 0, link_b = 0;  // pair achieving the clearance (1-based)
};

// Chain adjacency plus the model's explicit ignore list.
inline bool self_collision_pair_ignored(const RobotModel& model, int ka, int kb) {
  if (std::abs(ka - kb) <= 1) return true;
  for (const auto& [i, j] : model.ignore_pairs)
    if ((i == ka && j == kb) || (i == kb && j == ka)) return true;
  return false;
}

// Minimum pairwise clearance over non-adjacent link pairs; colliding when it
// reaches zero. Stand-in for a mesh collision library, exact on the shipped
// sphere/capsule models.
inline SelfCollisionResult self_collision_oracle(const RobotModel& model, const Eigen::VectorXd& q) {
  const FrameSet frames = forward_frames(model, q);
  const int K = model.link_count();
  SelfCollisionResult res;
  for (int ka = 1; ka <= K; ++ka) {
    for (int kb = ka + 1; kb <= K; ++kb) {
      if (self_collision_pair_ignored(model, ka, kb)) continue;
      for (const auto& pa : model.links[ka - 1].primitives) {
        for (const auto& pb : model.links[kb - 1].primitives) {
          const double c = primitive_pair_clearance(pa, frames.link(ka), pb, frames.link(kb));
          if (c < res.clearance) {
            res.clearance = c;
            res.link_a = ka;
            res.link_b = kb;
          }
        }
      }
    }
  }
  res.colliding = res.clearance <= 0.0;
  return res;
}

}  // namespace sdfsc
