#pragma once

// Sources of "complete object" points for the feature layer: a file-backed
// provider for externally computed completions and a mirror heuristic that
// reflects the partial cloud through a plane to approximate the hidden side.

#include <memory>
#include <string>

#include "pcf/cloud.hpp"
#include "pcf/errors.hpp"
#include "pcf/kernels.hpp"

namespace pcf {

struct CompletionRequest {
  Cloud partial;          // FPS-sampled original points
  Vec3 view_dir;          // unit camera viewing direction, cloud frame
  size_t target_count = 1024;

  void validate() const {
    if (partial.size() != target_count)
      throw Error::validation("completion request: expected " + std::to_string(target_count) +
                              " partial points, got " + std::to_string(partial.size()));
    if (std::abs(view_dir.norm() - 1.0) > 1e-9)
      throw Error::validation("completion request: view direction must be unit length");
  }
};

// Loads a completion cloud from PLY; FPS-downsamples when it holds more than
// `target_count` points.
inline Cloud load_completion(const std::string& path, size_t target_count = 1024) {
  Cloud cloud = load_ply(path);
  if (cloud.size() < target_count)
    throw Error::validation("completion " + path + " has " + std::to_string(cloud.size()) +
                            " points, need at least " + std::to_string(target_count));
  if (cloud.size() == target_count) return cloud;
  return cloud.subset(fps(cloud, target_count, 0));
}

// Reflects each partial point across the plane through the partial centroid
// with normal view_dir, unions with the partial cloud, and FPS-downsamples
// back to the target count.
inline Cloud mirror_complete(const CompletionRequest& req) {
  req.validate();
  const Vec3 c = req.partial.centroid();
  const Vec3 u = req.view_dir;
  Cloud unioned;
  unioned.frame = req.partial.frame;
  unioned.points = req.partial.points;
  unioned.points.reserve(req.partial.size() * 2);
  for (const Vec3& p : req.partial.points) unioned.points.push_back(p + 2.0 * (c - p).dot(u) * u);
  return unioned.subset(fps(unioned, req.target_count, 0));
}

class CompletionProvider {
public:
  virtual ~CompletionProvider() = default;
  virtual Cloud complete(const CompletionRequest& req) = 0;
  virtual std::string describe() const = 0;
};

class MirrorProvider final : public CompletionProvider {
public:
  Cloud complete(const CompletionRequest& req) override { return mirror_complete(req); }
  std::string describe() const override { return "mirror"; }
};

class FileProvider final : public CompletionProvider {
public:
  explicit FileProvider(std::string path) : path_(std::move(path)) {}
  Cloud complete(const CompletionRequest& req) override {
    req.validate();
    Cloud out = load_completion(path_, req.target_count);
    if (out.frame != req.partial.frame)
      throw Error::validation("completion file frame does not match partial cloud");
    return out;
  }
  std::string describe() const override { return "file:" + path_; }

private:
  std::string path_;
};

// Provider spec strings: "mirror" or "file:<path>".
inline std::unique_ptr<CompletionProvider> make_completion_provider(const std::string& spec) {
  if (spec == "mirror") return std::make_unique<MirrorProvider>();
  if (spec.rfind("file:", 0) == 0) return std::make_unique<FileProvider>(spec.substr(5));
  throw Error::argument("unknown completion provider '" + spec + "' (use mirror or file:<path>)");
}

}  // namespace pcf
