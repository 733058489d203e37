#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdfsc/common.hpp"
#include "sdfsc/oracle.hpp"
#include "sdfsc/robot.hpp"

namespace sdfsc {

/// One link-frame training pair for the per-link distance nets.
struct SdfSample {
  Eigen::Vector3f p;  // link-frame point [m]
  float d = 0.0f;     // signed distance [m]
};

/// One labeled joint configuration; q is normalized to [0,1]^n.
struct SelfCollisionSample {
  Eigen::VectorXf q;
  std::int8_t label = +1;  // +1 free, -1 colliding
};

struct SdfDatasetConfig {
  int per_link_count = 200000;
  double near_fraction = 0.7;
  double near_band = 0.05;   // [m], samples kept when |d| <= near_band
  double far_radius = 1.2;   // [m], ball radius for the remaining samples
};

namespace detail {

// Link-frame AABB of a link's primitives, conservatively padded.
inline void link_bounds(const LinkShape& link, Eigen::Vector3d& lo, Eigen::Vector3d& hi) {
  lo.setConstant(std::numeric_limits<double>::infinity());
  hi.setConstant(-std::numeric_limits<double>::infinity());
  for (const auto& prim : link.primitives) {
    double reach = 0.0;
    switch (prim.kind) {
      case ShapeKind::Sphere: reach = prim.radius; break;
      case ShapeKind::Capsule: reach = prim.radius + prim.half_length; break;
      case ShapeKind::Box: reach = prim.half_extents.norm(); break;
    }
    const Eigen::Vector3d c = prim.pose.translation();
    lo = lo.cwiseMin(c - Eigen::Vector3d::Constant(reach));
    hi = hi.cwiseMax(c + Eigen::Vector3d::Constant(reach));
  }
}

// Point near the surface of one primitive: a surface point plus a signed
// normal offset in [-band, band]. Rejection against the union SDF follows.
inline Eigen::Vector3d sample_near_primitive(const Primitive& prim, double band,
                                             std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::Vector3d dir(gauss(rng), gauss(rng), gauss(rng));
  if (dir.norm() < 1e-9) dir = Eigen::Vector3d::UnitX();
  dir.normalize();
  const double off = band * uni(rng);
  Eigen::Vector3d p_prim;
  switch (prim.kind) {
    case ShapeKind::Sphere:
      p_prim = (prim.radius + off) * dir;
      break;
    case ShapeKind::Capsule: {
      const double z = prim.half_length * uni(rng);
      p_prim = Eigen::Vector3d(0, 0, z) + (prim.radius + off) * dir;
      break;
    }
    case ShapeKind::Box: {
      // random face point, offset along the face normal
      std::uniform_int_distribution<int> face(0, 5);
      const int f = face(rng);
      const int axis = f / 2;
      const double side = (f % 2 == 0) ? 1.0 : -1.0;
      Eigen::Vector3d p = Eigen::Vector3d(uni(rng), uni(rng), uni(rng)).cwiseProduct(prim.half_extents);
      p[axis] = side * (prim.half_extents[axis] + off);
      p_prim = p;
      break;
    }
  }
  return prim.pose * p_prim;
}

inline Eigen::Vector3d sample_in_ball(const Eigen::Vector3d& center, double radius,
                                      std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Eigen::Vector3d dir(gauss(rng), gauss(rng), gauss(rng));
  if (dir.norm() < 1e-9) dir = Eigen::Vector3d::UnitX();
  dir.normalize();
  const double r = radius * std::cbrt(uni(rng));
  return center + r * dir;
}

}  // namespace detail

// Link-frame samples for one link: near_fraction of the points land within
// |d| <= near_band of the union surface, the rest are uniform in a ball of
// far_radius around the link. Deterministic in (seed, link index).
inline std::vector<SdfSample> sample_link_sdf_dataset(const RobotModel& model, int link,
                                                      const SdfDatasetConfig& cfg,
                                                      std::uint64_t seed) {
  if (cfg.per_link_count <= 0) throw ModelError("sample_link_sdf_dataset: count must be positive");
  if (cfg.near_fraction < 0.0 || cfg.near_fraction > 1.0)
    throw ModelError("sample_link_sdf_dataset: near_fraction outside [0,1]");
  const LinkShape& shape = model.links[link - 1];
  auto rng = make_rng(seed, static_cast<std::uint64_t>(link));
  std::uniform_int_distribution<std::size_t> prim_pick(0, shape.primitives.size() - 1);

  Eigen::Vector3d lo, hi;
  detail::link_bounds(shape, lo, hi);
  const Eigen::Vector3d center = 0.5 * (lo + hi);

  const long near_target = std::lround(cfg.near_fraction * cfg.per_link_count);
  std::vector<SdfSample> out;
  out.reserve(cfg.per_link_count);

  long near_made = 0;
  std::uint64_t attempts = 0;
  const std::uint64_t max_attempts = 1000ull * static_cast<std::uint64_t>(std::max(near_target, 1l));
  while (near_made < near_target) {
    if (++attempts > max_attempts)
      throw SolveError("sample_link_sdf_dataset: near-band rejection sampling stalled (band too thin)");
    const Primitive& prim = shape.primitives[prim_pick(rng)];
    const Eigen::Vector3d p = detail::sample_near_primitive(prim, cfg.near_band, rng);
    const double d = link_sdf(shape, p);
    if (std::abs(d) > cfg.near_band) continue;
    out.push_back({p.cast<float>(), static_cast<float>(d)});
    ++near_made;
  }
  for (long i = near_target; i < cfg.per_link_count; ++i) {
    const Eigen::Vector3d p = detail::sample_in_ball(center, cfg.far_radius, rng);
    out.push_back({p.cast<float>(), static_cast<float>(link_sdf(shape, p))});
  }
  return out;
}

// All links; shards one substream per link so output is schedule-independent.
inline std::vector<std::vector<SdfSample>> sample_sdf_dataset(const RobotModel& model,
                                                              const SdfDatasetConfig& cfg,
                                                              std::uint64_t seed,
                                                              int threads = 0) {
  const int K = model.link_count();
  std::vector<std::vector<SdfSample>> out(K);
  parallel_for_chunks(K, [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k)
      out[k] = sample_link_sdf_dataset(model, static_cast<int>(k) + 1, cfg, seed);
  }, threads, 1);
  return out;
}

struct SelfCollisionCounts {
  int train = 20000;
  int val = 5000;
  int test = 10000;
};

struct SelfCollisionDataset {
  std::vector<SelfCollisionSample> train, val, test;
  long free_count = 0, colliding_count = 0;  // balance over all three splits

  void require_both_classes() const {
    if (free_count == 0 || colliding_count == 0)
      throw ModelError("self-collision dataset has an empty class (free=" +
                       std::to_string(free_count) + ", colliding=" +
                       std::to_string(colliding_count) + ")");
  }
};

// Uniform configurations in the joint-limit box, normalized to [0,1]^n and
// labeled by the analytic self-collision oracle. Deterministic per seed.
inline SelfCollisionDataset sample_selfcollision_dataset(const RobotModel& model,
                                                         const SelfCollisionCounts& counts,
                                                         std::uint64_t seed,
                                                         int threads = 0) {
  if (counts.train <= 0 || counts.val <= 0 || counts.test <= 0)
    throw ModelError("sample_selfcollision_dataset: counts must be positive");
  const int n = model.dof();
  const long total = static_cast<long>(counts.train) + counts.val + counts.test;
  std::vector<SelfCollisionSample> all(total);

  parallel_for_chunks(total, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      auto rng = make_rng(seed, 0x5c000000ull + i);
      std::uniform_real_distribution<double> uni(0.0, 1.0);
      Eigen::VectorXd qn(n);
      for (int j = 0; j < n; ++j) qn[j] = uni(rng);
      const Eigen::VectorXd q = model.denormalize_config(qn);
      const bool colliding = self_collision_oracle(model, q).colliding;
      all[i].q = qn.cast<float>();
      all[i].label = colliding ? -1 : +1;
    }
  }, threads);

  SelfCollisionDataset out;
  out.train.assign(all.begin(), all.begin() + counts.train);
  out.val.assign(all.begin() + counts.train, all.begin() + counts.train + counts.val);
  out.test.assign(all.begin() + counts.train + counts.val, all.end());
  for (const auto& s : all)
    (s.label > 0 ? out.free_count : out.colliding_count)++;
  return out;
}

// ---------------------------------------------------------------------------
// Binary dataset files: little-endian float32 records plus a JSON sidecar.

inline void write_sdf_dataset_file(const std::filesystem::path& bin_path,
                                   const std::vector<SdfSample>& samples, int link,
                                   std::uint64_t seed, const SdfDatasetConfig& cfg) {
  std::ofstream os(bin_path, std::ios::binary);
  if (!os) throw ModelError("cannot open dataset file for writing: " + bin_path.string());
  for (const auto& s : samples) {
    float rec[4] = {s.p.x(), s.p.y(), s.p.z(), s.d};
    os.write(reinterpret_cast<const char*>(rec), sizeof(rec));
  }
  nlohmann::json sidecar{{"link", link},
                         {"count", samples.size()},
                         {"seed", seed},
                         {"cfg",
                          {{"per_link_count", cfg.per_link_count},
                           {"near_fraction", cfg.near_fraction},
                           {"near_band", cfg.near_band},
                           {"far_radius", cfg.far_radius}}}};
  std::ofstream js(bin_path.string() + ".json");
  js << sidecar.dump(2) << "\n";
}

inline std::vector<SdfSample> read_sdf_dataset_file(const std::filesystem::path& bin_path) {
  std::ifstream is(bin_path, std::ios::binary);
  if (!is) throw ModelError("cannot open dataset file: " + bin_path.string());
  std::vector<SdfSample> out;
  float rec[4];
  while (is.read(reinterpret_cast<char*>(rec), sizeof(rec)))
    out.push_back({Eigen::Vector3f(rec[0], rec[1], rec[2]), rec[3]});
  return out;
}

inline void write_selfcollision_file(const std::filesystem::path& bin_path,
                                     const std::vector<SelfCollisionSample>& samples, int n,
                                     std::uint64_t seed) {
  std::ofstream os(bin_path, std::ios::binary);
  if (!os) throw ModelError("cannot open dataset file for writing: " + bin_path.string());
  for (const auto& s : samples) {
    os.write(reinterpret_cast<const char*>(s.q.data()), sizeof(float) * n);
    os.write(reinterpret_cast<const char*>(&s.label), sizeof(std::int8_t));
  }
  nlohmann::json sidecar{{"n", n}, {"count", samples.size()}, {"seed", seed}};
  std::ofstream js(bin_path.string() + ".json");
  js << sidecar.dump(2) << "\n";
}

inline std::vector<SelfCollisionSample> read_selfcollision_file(const std::filesystem::path& bin_path) {
  std::ifstream js(bin_path.string() + ".json");
  if (!js) throw ModelError("missing dataset sidecar: " + bin_path.string() + ".json");
  nlohmann::json sidecar = nlohmann::json::parse(js);
  const int n = sidecar.at("n").get<int>();
  std::ifstream is(bin_path, std::ios::binary);
  if (!is) throw ModelError("cannot open dataset file: " + bin_path.string());
  std::vector<SelfCollisionSample> out;
  std::vector<float> buf(n);
  std::int8_t label;
  while (is.read(reinterpret_cast<char*>(buf.data()), sizeof(float) * n) &&
         is.read(reinterpret_cast<char*>(&label), sizeof(std::int8_t))) {
    SelfCollisionSample s;
    s.q = Eigen::Map<Eigen::VectorXf>(buf.data(), n);
    s.label = label;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace sdfsc
