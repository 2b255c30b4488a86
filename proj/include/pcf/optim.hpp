#pragma once

#include <cmath>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "pcf/errors.hpp"
#include "pcf/params.hpp"

namespace pcf {

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 5e-4;
};

// AdamW with decoupled weight decay. Moment buffers are allocated lazily and
// shape-checked against their parameters.
class AdamW {
public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  const AdamWConfig& config() const { return cfg_; }
  size_t step_count() const { return t_; }

  // Parameters without an entry in `grads` receive a zero gradient (decay
  // still applies).
  void step(ParamStore& params, const std::map<std::string, std::vector<double>>& grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (const auto& name : params.names()) {
      const Tensor& p = params.at(name);
      const size_t n = p.size();
      auto& mom = state_[name];
      if (mom.m.empty()) {
        mom.m.assign(n, 0.0);
        mom.v.assign(n, 0.0);
      }
      if (mom.m.size() != n)
        throw Error::dimension("optimizer state for " + name + " does not match parameter");
      const std::vector<double>* g = nullptr;
      if (auto it = grads.find(name); it != grads.end()) {
        if (it->second.size() != n)
          throw Error::dimension("gradient for " + name + " does not match parameter");
        g = &it->second;
      }
      std::vector<double> next(p.values());
      for (size_t i = 0; i < n; ++i) {
        const double gi = g ? (*g)[i] : 0.0;
        if (!std::isfinite(gi)) throw Error::training("non-finite gradient for parameter " + name);
        mom.m[i] = cfg_.beta1 * mom.m[i] + (1.0 - cfg_.beta1) * gi;
        mom.v[i] = cfg_.beta2 * mom.v[i] + (1.0 - cfg_.beta2) * gi * gi;
        const double mhat = mom.m[i] / bc1;
        const double vhat = mom.v[i] / bc2;
        next[i] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * next[i]);
      }
      params.set(name, std::move(next));
    }
  }

private:
  struct Moments {
    std::vector<double> m, v;
  };
  AdamWConfig cfg_;
  size_t t_ = 0;
  std::unordered_map<std::string, Moments> state_;
};

}  // namespace pcf
