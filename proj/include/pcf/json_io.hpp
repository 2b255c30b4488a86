#pragma once

// JSON schemas for the on-disk interchange formats: grasp poses, contact
// grasps, robot frames, scenes, views, metrics and bench records.

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pcf/errors.hpp"
#include "pcf/geom.hpp"
#include "pcf/gripper.hpp"
#include "pcf/scene.hpp"
#include "pcf/score_filter.hpp"

namespace pcf {

using Json = nlohmann::json;

inline Json to_json(const Vec3& v) { return Json::array({v.x, v.y, v.z}); }

inline Vec3 vec3_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw Error::validation("expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline Json to_json(const Mat3& m) {
  Json rows = Json::array();
  for (int r = 0; r < 3; ++r) rows.push_back(Json::array({m(r, 0), m(r, 1), m(r, 2)}));
  return rows;
}

inline Mat3 mat3_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw Error::validation("expected a 3x3 array");
  Mat3 m;
  for (int r = 0; r < 3; ++r) {
    if (!j[r].is_array() || j[r].size() != 3) throw Error::validation("expected a 3x3 array");
    for (int c = 0; c < 3; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

inline Json to_json(const Rigid& t) { return {{"R", to_json(t.R)}, {"t", to_json(t.t)}}; }

inline Rigid rigid_from_json(const Json& j) {
  return {mat3_from_json(j.at("R")), vec3_from_json(j.at("t"))};
}

inline Json to_json(const GraspPose& g) {
  return {{"R", to_json(g.R)}, {"t", to_json(g.t)}, {"width", g.width}, {"score", g.score}};
}

inline GraspPose pose_from_json(const Json& j) {
  GraspPose g;
  g.R = mat3_from_json(j.at("R"));
  g.t = vec3_from_json(j.at("t"));
  g.width = j.at("width").get<double>();
  g.score = j.value("score", 0.0);
  return g;
}

inline Json to_json(const ContactGrasp& g) {
  return {{"c", to_json(g.contact)},
          {"a", to_json(g.approach)},
          {"b", to_json(g.baseline)},
          {"width", g.width}};
}

inline ContactGrasp contact_from_json(const Json& j) {
  return {vec3_from_json(j.at("c")), vec3_from_json(j.at("a")), vec3_from_json(j.at("b")),
          j.at("width").get<double>()};
}

inline Json to_json(const LabeledGrasp& l) {
  return {{"contact", to_json(l.grasp)}, {"quality", l.quality}};
}

inline LabeledGrasp labeled_grasp_from_json(const Json& j) {
  return {contact_from_json(j.at("contact")), j.at("quality").get<double>()};
}

inline Json to_json(const RobotFrame& f) {
  return {{"origin", to_json(f.origin)},
          {"z_axis", to_json(f.z_axis)},
          {"R_cr", to_json(f.camera_to_robot)}};
}

inline RobotFrame robot_frame_from_json(const Json& j) {
  RobotFrame f;
  f.origin = vec3_from_json(j.at("origin"));
  f.z_axis = vec3_from_json(j.at("z_axis"));
  f.camera_to_robot = mat3_from_json(j.at("R_cr"));
  f.validate();
  return f;
}

inline Json to_json(const Primitive& p) {
  return {{"kind", primitive_kind_name(p.kind)}, {"params", p.params}, {"pose", to_json(p.pose)}};
}

inline Primitive primitive_from_json(const Json& j) {
  Primitive p;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "box")
    p.kind = Primitive::Kind::box;
  else if (kind == "cylinder")
    p.kind = Primitive::Kind::cylinder;
  else if (kind == "sphere")
    p.kind = Primitive::Kind::sphere;
  else
    throw Error::validation("unknown primitive kind '" + kind + "'");
  p.params = j.at("params").get<std::vector<double>>();
  p.pose = rigid_from_json(j.at("pose"));
  return p;
}

inline Json to_json(const Scene& s) {
  Json objects = Json::array(), labels = Json::array();
  for (const auto& o : s.objects) objects.push_back(to_json(o));
  for (const auto& l : s.labels) labels.push_back(to_json(l));
  return {{"objects", objects}, {"labels", labels}};
}

inline Scene scene_from_json(const Json& j) {
  Scene s;
  for (const auto& o : j.at("objects")) s.objects.push_back(primitive_from_json(o));
  if (j.contains("labels"))
    for (const auto& l : j.at("labels")) s.labels.push_back(labeled_grasp_from_json(l));
  return s;
}

inline Json to_json(const ViewSpec& v) {
  return {{"camera_to_world", to_json(v.camera_to_world)},
          {"focal", v.focal},
          {"cx", v.cx},
          {"cy", v.cy},
          {"width", v.width},
          {"height", v.height},
          {"near", v.near},
          {"far", v.far}};
}

inline ViewSpec view_from_json(const Json& j) {
  ViewSpec v;
  v.camera_to_world = rigid_from_json(j.at("camera_to_world"));
  v.focal = j.at("focal").get<double>();
  v.cx = j.at("cx").get<double>();
  v.cy = j.at("cy").get<double>();
  v.width = j.at("width").get<int>();
  v.height = j.at("height").get<int>();
  v.near = j.at("near").get<double>();
  v.far = j.at("far").get<double>();
  v.validate();
  return v;
}

inline Json to_json(const EvalMetrics& m) {
  return {{"precision_at_k", m.precision_at_k},
          {"coverage", m.coverage},
          {"collision_rate", m.collision_rate},
          {"proposals", m.proposals},
          {"labels", m.labels},
          {"matched_topk", m.matched_topk},
          {"matched_labels", m.matched_labels}};
}

// Proposal files: grasps plus provenance for experiment bookkeeping.
struct Provenance {
  std::string config_hash;
  uint64_t seed = 0;
  std::string revision;
};

inline Json to_json(const Provenance& p) {
  return {{"config_hash", p.config_hash}, {"seed", p.seed}, {"revision", p.revision}};
}

inline Json grasps_to_json(const std::vector<GraspPose>& grasps, const Provenance& prov) {
  Json arr = Json::array();
  for (const auto& g : grasps) arr.push_back(to_json(g));
  return {{"grasps", arr}, {"provenance", to_json(prov)}};
}

inline Json filtered_to_json(const std::vector<FilteredGrasp>& grasps, const Provenance& prov) {
  Json arr = Json::array();
  for (const auto& g : grasps) {
    Json item = to_json(g.pose);
    item["direction_score"] = g.direction;
    item["filtered_score"] = g.filtered;
    arr.push_back(item);
  }
  return {{"grasps", arr}, {"provenance", to_json(prov)}};
}

inline std::vector<GraspPose> grasps_from_json(const Json& j) {
  std::vector<GraspPose> out;
  for (const auto& g : j.at("grasps")) out.push_back(pose_from_json(g));
  return out;
}

inline Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error::io("cannot open: " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw Error::io("malformed JSON in " + path + ": " + e.what());
  }
  return j;
}

inline void save_json(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error::io("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw Error::io("write failed: " + path);
}

}  // namespace pcf
