#pragma once

// Kernel timing harness for the CLI bench subcommand and the performance
// acceptance check.

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pcf/cloud.hpp"
#include "pcf/json_io.hpp"
#include "pcf/kernels.hpp"
#include "pcf/pcf_layer.hpp"
#include "pcf/random.hpp"

namespace pcf {

struct BenchRecord {
  std::string kernel;
  size_t n = 0;
  Json params;
  size_t repeats = 0;
  double mean_ms = 0.0;
  double p95_ms = 0.0;
  int threads = 1;
  std::string hardware;
};

inline Json to_json(const BenchRecord& r) {
  return {{"kernel", r.kernel},   {"n", r.n},           {"params", r.params},
          {"repeats", r.repeats}, {"mean_ms", r.mean_ms}, {"p95_ms", r.p95_ms},
          {"threads", r.threads}, {"hardware", r.hardware}};
}

inline std::string cpu_model_name() {
  std::ifstream in("/proc/cpuinfo");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("model name", 0) == 0) {
      const auto pos = line.find(':');
      if (pos != std::string::npos) {
        std::string name = line.substr(pos + 1);
        const auto start = name.find_first_not_of(" \t");
        if (start != std::string::npos) return name.substr(start);
      }
    }
  }
  return "unknown-cpu";
}

namespace detail {

inline Cloud random_cloud(size_t n, Rng& rng, double extent = 0.3) {
  Cloud c;
  c.points.reserve(n);
  for (size_t i = 0; i < n; ++i)
    c.points.push_back({uniform(rng, -extent, extent), uniform(rng, -extent, extent),
                        uniform(rng, -extent, extent)});
  return c;
}

template <class F>
BenchRecord time_kernel(const std::string& name, size_t n, Json params, size_t repeats, F&& fn) {
  if (repeats < 10) repeats = 10;
  std::vector<double> ms(repeats);
  fn();  // warm-up
  for (size_t r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    ms[r] = std::chrono::duration<double, std::milli>(t1 - t0).count();
  }
  BenchRecord rec;
  rec.kernel = name;
  rec.n = n;
  rec.params = std::move(params);
  rec.repeats = repeats;
  double sum = 0.0;
  for (double v : ms) sum += v;
  rec.mean_ms = sum / static_cast<double>(repeats);
  std::sort(ms.begin(), ms.end());
  rec.p95_ms = ms[std::min(repeats - 1, static_cast<size_t>(0.95 * static_cast<double>(repeats)))];
  rec.threads = 1;
  rec.hardware = cpu_model_name();
  return rec;
}

}  // namespace detail

inline BenchRecord bench_fps(size_t n, size_t m, size_t repeats, uint64_t seed = 7) {
  Rng rng(seed);
  const Cloud cloud = detail::random_cloud(n, rng);
  volatile int sink = 0;
  auto rec = detail::time_kernel("fps", n, {{"m", m}}, repeats, [&] {
    const auto idx = fps(cloud, m, 0);
    sink = sink + idx.back();
  });
  return rec;
}

inline BenchRecord bench_query_ball(size_t n, size_t m, double radius, size_t fanout,
                                    size_t repeats, uint64_t seed = 7) {
  Rng rng(seed);
  const Cloud src = detail::random_cloud(n, rng);
  const Cloud centers = detail::random_cloud(m, rng);
  volatile int sink = 0;
  return detail::time_kernel("query_ball", n,
                             {{"m", m}, {"radius", radius}, {"fanout", fanout}}, repeats, [&] {
                               const auto g = query_ball(src, centers, radius, fanout);
                               sink = sink + g.valid_count.back();
                             });
}

inline BenchRecord bench_pcf_forward(size_t n, size_t repeats, uint64_t seed = 7) {
  Rng rng(seed);
  const PcfConfig cfg;
  Cloud original = detail::random_cloud(n, rng, 0.1);
  Cloud completion = detail::random_cloud(n, rng, 0.1);
  const Cloud concat = concat_points(original, completion);
  const ParamStore params = init_pcf_params(cfg, rng);
  const ParamView view(params);
  volatile double sink = 0.0;
  return detail::time_kernel("pcf_forward", n, {{"out_channels", cfg.out_channels()}}, repeats,
                             [&] {
                               const FeatureMatrix f = pcf_forward(original, concat, cfg, view);
                               sink = sink + f.values.values().back();
                             });
}

}  // namespace pcf
