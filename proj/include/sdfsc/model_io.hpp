#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "sdfsc/robot.hpp"

namespace sdfsc {

namespace detail {

// Pose fields: "xyz" translation plus either "R" (row-major rotation matrix,
// written on save so poses round-trip exactly) or "rpy" (authoring shorthand).
inline Eigen::Isometry3d pose_from_json(const nlohmann::json& j) {
  Eigen::Isometry3d pose = Eigen::Isometry3d::Identity();
  if (j.contains("xyz")) {
    const auto& v = j.at("xyz");
    pose.translation() = Eigen::Vector3d(v.at(0), v.at(1), v.at(2));
  }
  if (j.contains("R")) {
    const auto& v = j.at("R");
    Eigen::Matrix3d R;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) R(r, c) = v.at(3 * r + c).get<double>();
    pose.linear() = R;
  } else if (j.contains("rpy")) {
    const auto& v = j.at("rpy");
    pose.linear() = (Eigen::AngleAxisd(v.at(2).get<double>(), Eigen::Vector3d::UnitZ()) *
                     Eigen::AngleAxisd(v.at(1).get<double>(), Eigen::Vector3d::UnitY()) *
                     Eigen::AngleAxisd(v.at(0).get<double>(), Eigen::Vector3d::UnitX()))
                        .toRotationMatrix();
  }
  return pose;
}

inline nlohmann::json pose_to_json(const Eigen::Isometry3d& pose) {
  const Eigen::Vector3d t = pose.translation();
  nlohmann::json R = nlohmann::json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) R.push_back(pose.linear()(r, c));
  return nlohmann::json{{"xyz", {t.x(), t.y(), t.z()}}, {"R", R}};
}

inline Primitive primitive_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  Primitive p;
  if (j.contains("pose")) p.pose = pose_from_json(j.at("pose"));
  if (kind == "sphere") {
    p.kind = ShapeKind::Sphere;
    p.radius = j.at("radius").get<double>();
  } else if (kind == "capsule") {
    p.kind = ShapeKind::Capsule;
    p.radius = j.at("radius").get<double>();
    if (j.contains("endpoints")) {
      // authoring shorthand: capsule spanning two link-frame points
      const auto& ep = j.at("endpoints");
      const Eigen::Vector3d p0(ep.at(0).at(0), ep.at(0).at(1), ep.at(0).at(2));
      const Eigen::Vector3d p1(ep.at(1).at(0), ep.at(1).at(1), ep.at(1).at(2));
      const Eigen::Vector3d axis = p1 - p0;
      p.half_length = 0.5 * axis.norm();
      if (p.half_length < 1e-12) throw ModelError("capsule endpoints coincide");
      p.pose.translation() = 0.5 * (p0 + p1);
      p.pose.linear() =
          Eigen::Quaterniond::FromTwoVectors(Eigen::Vector3d::UnitZ(), axis).toRotationMatrix();
    } else {
      p.half_length = j.at("half_length").get<double>();
    }
  } else if (kind == "box") {
    p.kind = ShapeKind::Box;
    const auto& he = j.at("half_extents");
    p.half_extents = Eigen::Vector3d(he.at(0), he.at(1), he.at(2));
  } else {
    throw ModelError("unknown primitive kind '" + kind + "'");
  }
  return p;
}

inline nlohmann::json primitive_to_json(const Primitive& p) {
  nlohmann::json j;
  switch (p.kind) {
    case ShapeKind::Sphere:
      j = {{"kind", "sphere"}, {"radius", p.radius}};
      break;
    case ShapeKind::Capsule:
      j = {{"kind", "capsule"}, {"radius", p.radius}, {"half_length", p.half_length}};
      break;
    case ShapeKind::Box:
      j = {{"kind", "box"},
           {"half_extents", {p.half_extents.x(), p.half_extents.y(), p.half_extents.z()}}};
      break;
  }
  j["pose"] = pose_to_json(p.pose);
  return j;
}

}  // namespace detail

inline RobotModel robot_model_from_json(const nlohmann::json& j) {
  RobotModel model;
  try {
    model.name = j.at("name").get<std::string>();
    const std::string conv = j.at("convention").get<std::string>();
    if (conv == "mdh")
      model.convention = DhConvention::Modified;
    else if (conv == "dh")
      model.convention = DhConvention::Standard;
    else
      throw ModelError("unknown DH convention '" + conv + "' (expected \"dh\" or \"mdh\")");

    std::vector<double> lo, hi, vel;
    for (const auto& joint : j.at("joints")) {
      DhRow row;
      row.a = joint.value("a", 0.0);
      row.alpha = joint.value("alpha", 0.0);
      row.d = joint.value("d", 0.0);
      row.theta_offset = joint.value("theta_offset", 0.0);
      const std::string type = joint.value("type", "revolute");
      if (type == "revolute")
        row.type = JointType::Revolute;
      else if (type == "prismatic")
        row.type = JointType::Prismatic;
      else if (type == "fixed")
        row.type = JointType::Fixed;
      else
        throw ModelError("unknown joint type '" + type + "'");
      model.chain.push_back(row);
      if (row.type != JointType::Fixed) {
        const auto& lim = joint.at("limits");
        lo.push_back(lim.at(0).get<double>());
        hi.push_back(lim.at(1).get<double>());
        vel.push_back(joint.at("vel_limit").get<double>());
      }
    }
    model.q_lower = Eigen::Map<Eigen::VectorXd>(lo.data(), lo.size());
    model.q_upper = Eigen::Map<Eigen::VectorXd>(hi.data(), hi.size());
    model.vel_limit = Eigen::Map<Eigen::VectorXd>(vel.data(), vel.size());

    model.links.resize(model.chain.size());
    for (const auto& link : j.at("links")) {
      const int frame = link.at("frame").get<int>();
      if (frame < 1 || frame > static_cast<int>(model.chain.size()))
        throw ModelError("links[].frame " + std::to_string(frame) + " out of range");
      for (const auto& shape : link.at("shapes"))
        model.links[frame - 1].primitives.push_back(detail::primitive_from_json(shape));
    }
    if (j.contains("ignore_pairs"))
      for (const auto& pair : j.at("ignore_pairs"))
        model.ignore_pairs.emplace_back(pair.at(0).get<int>(), pair.at(1).get<int>());
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(std::string("robot model parse error: ") + e.what());
  }
  model.validate();
  return model;
}

inline nlohmann::json robot_model_to_json(const RobotModel& model) {
  nlohmann::json j;
  j["name"] = model.name;
  j["convention"] = model.convention == DhConvention::Modified ? "mdh" : "dh";
  nlohmann::json joints = nlohmann::json::array();
  int movable = 0;
  for (const auto& row : model.chain) {
    nlohmann::json joint{{"a", row.a},
                         {"alpha", row.alpha},
                         {"d", row.d},
                         {"theta_offset", row.theta_offset}};
    switch (row.type) {
      case JointType::Revolute: joint["type"] = "revolute"; break;
      case JointType::Prismatic: joint["type"] = "prismatic"; break;
      case JointType::Fixed: joint["type"] = "fixed"; break;
    }
    if (row.type != JointType::Fixed) {
      joint["limits"] = {model.q_lower[movable], model.q_upper[movable]};
      joint["vel_limit"] = model.vel_limit[movable];
      ++movable;
    }
    joints.push_back(joint);
  }
  j["joints"] = joints;
  nlohmann::json links = nlohmann::json::array();
  for (std::size_t k = 0; k < model.links.size(); ++k) {
    nlohmann::json shapes = nlohmann::json::array();
    for (const auto& prim : model.links[k].primitives) shapes.push_back(detail::primitive_to_json(prim));
    links.push_back({{"frame", k + 1}, {"shapes", shapes}});
  }
  j["links"] = links;
  if (!model.ignore_pairs.empty()) {
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& [a, b] : model.ignore_pairs) pairs.push_back({a, b});
    j["ignore_pairs"] = pairs;
  }
  return j;
}

// Parses and validates a robot model file; throws ModelError naming the
// offending field on parse or invariant failure.
inline RobotModel load_robot_model(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ModelError("robot model file not found: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ModelError("robot model JSON parse error in " + path.string() + ": " + e.what());
  }
  return robot_model_from_json(j);
}

inline void save_robot_model(const std::filesystem::path& path, const RobotModel& model) {
  std::ofstream os(path);
  if (!os) throw ModelError("cannot write robot model file: " + path.string());
  os << robot_model_to_json(model).dump(2) << "\n";
}

}  // namespace sdfsc
