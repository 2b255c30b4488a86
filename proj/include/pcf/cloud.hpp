#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pcf/errors.hpp"
#include "pcf/geom.hpp"

namespace pcf {

enum class Frame { camera, robot };

inline const char* frame_name(Frame f) { return f == Frame::camera ? "camera" : "robot"; }

struct Cloud {
  std::vector<Vec3> points;
  Frame frame = Frame::camera;
  std::vector<Vec3> normals;  // empty, or one unit normal per point

  size_t size() const { return points.size(); }
  bool has_normals() const { return !normals.empty(); }

  void validate() const {
    for (const Vec3& p : points)
      if (!p.finite()) throw Error::validation("cloud contains non-finite coordinates");
    if (!normals.empty()) {
      if (normals.size() != points.size())
        throw Error::validation("normal count does not match point count");
      for (const Vec3& n : normals)
        if (std::abs(n.norm() - 1.0) > 1e-6)
          throw Error::validation("cloud normal is not unit length");
    }
  }

  Cloud subset(const std::vector<int>& idx) const {
    Cloud out;
    out.frame = frame;
    out.points.reserve(idx.size());
    if (has_normals()) out.normals.reserve(idx.size());
    for (int i : idx) {
      out.points.push_back(points.at(static_cast<size_t>(i)));
      if (has_normals()) out.normals.push_back(normals.at(static_cast<size_t>(i)));
    }
    return out;
  }

  Vec3 centroid() const {
    if (points.empty()) throw Error::argument("centroid of empty cloud");
    Vec3 c;
    for (const Vec3& p : points) c += p;
    return c / static_cast<double>(points.size());
  }
};

// ASCII PLY, vertex element with x,y,z and optional nx,ny,nz float properties.
// The frame tag travels in a header comment.
inline void save_ply(const std::string& path, const Cloud& cloud) {
  std::ofstream out(path);
  if (!out) throw Error::io("cannot open for writing: " + path);
  const bool normals = cloud.has_normals();
  out << "ply\nformat ascii 1.0\n";
  out << "comment frame " << frame_name(cloud.frame) << "\n";
  out << "element vertex " << cloud.size() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  if (normals) out << "property double nx\nproperty double ny\nproperty double nz\n";
  out << "end_header\n";
  char buf[256];
  for (size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    if (normals) {
      const Vec3& n = cloud.normals[i];
      std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g %.17g %.17g %.17g\n", p.x, p.y, p.z, n.x,
                    n.y, n.z);
    } else {
      std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", p.x, p.y, p.z);
    }
    out << buf;
  }
  if (!out) throw Error::io("write failed: " + path);
}

inline Cloud load_ply(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error::io("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "ply") throw Error::io("not a PLY file: " + path);
  size_t vertex_count = 0;
  std::vector<std::string> props;
  Frame frame = Frame::camera;
  bool ascii = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "format") {
      std::string fmt;
      ls >> fmt;
      ascii = fmt == "ascii";
    } else if (tok == "comment") {
      std::string key, value;
      ls >> key >> value;
      if (key == "frame") frame = value == "robot" ? Frame::robot : Frame::camera;
    } else if (tok == "element") {
      std::string name;
      ls >> name >> vertex_count;
      if (name != "vertex") throw Error::io("unsupported PLY element '" + name + "' in " + path);
    } else if (tok == "property") {
      std::string type, name;
      ls >> type >> name;
      if (type != "float" && type != "double")
        throw Error::io("unsupported PLY property type '" + type + "' in " + path);
      props.push_back(name);
    } else if (tok == "end_header") {
      break;
    }
  }
  if (!ascii) throw Error::io("only ascii PLY is supported: " + path);
  const std::vector<std::string> plain = {"x", "y", "z"};
  const std::vector<std::string> with_normals = {"x", "y", "z", "nx", "ny", "nz"};
  const bool normals = props == with_normals;
  if (!normals && props != plain)
    throw Error::io("unsupported PLY vertex layout in " + path);
  Cloud cloud;
  cloud.frame = frame;
  cloud.points.reserve(vertex_count);
  if (normals) cloud.normals.reserve(vertex_count);
  for (size_t i = 0; i < vertex_count; ++i) {
    if (!std::getline(in, line)) throw Error::io("truncated PLY: " + path);
    std::istringstream ls(line);
    Vec3 p, n;
    if (!(ls >> p.x >> p.y >> p.z)) throw Error::io("malformed PLY vertex in " + path);
    if (normals && !(ls >> n.x >> n.y >> n.z)) throw Error::io("malformed PLY vertex in " + path);
    cloud.points.push_back(p);
    if (normals) cloud.normals.push_back(n);
  }
  cloud.validate();
  return cloud;
}

}  // namespace pcf
