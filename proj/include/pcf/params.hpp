#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "pcf/errors.hpp"
#include "pcf/tensor.hpp"

namespace pcf {

// Ordered collection of named parameter tensors.
class ParamStore {
public:
  Tensor& add(const std::string& name, Tensor value) {
    if (map_.count(name)) throw Error::argument("duplicate parameter name: " + name);
    order_.push_back(name);
    return map_[name] = std::move(value);
  }

  const Tensor& at(const std::string& name) const {
    auto it = map_.find(name);
    if (it == map_.end()) throw Error::argument("unknown parameter: " + name);
    return it->second;
  }

  bool contains(const std::string& name) const { return map_.count(name) != 0; }

  void set(const std::string& name, std::vector<double> data) {
    auto it = map_.find(name);
    if (it == map_.end()) throw Error::argument("unknown parameter: " + name);
    if (data.size() != it->second.size())
      throw Error::dimension("parameter " + name + ": size mismatch on update");
    it->second = Tensor(it->second.shape(), std::move(data));
  }

  const std::vector<std::string>& names() const { return order_; }
  size_t size() const { return order_.size(); }

  size_t total_elements() const {
    size_t n = 0;
    for (const auto& name : order_) n += at(name).size();
    return n;
  }

private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, Tensor> map_;
};

// Parameters as seen by a forward pass: plain tensors for inference, or
// tape-watched leaves during training.
class ParamView {
public:
  ParamView() = default;
  explicit ParamView(const ParamStore& store) : store_(&store) {}
  explicit ParamView(const std::unordered_map<std::string, Tensor>* watched)
      : watched_(watched) {}

  const Tensor& at(const std::string& name) const {
    if (watched_) {
      auto it = watched_->find(name);
      if (it == watched_->end()) throw Error::argument("unknown parameter: " + name);
      return it->second;
    }
    if (!store_) throw Error::argument("empty parameter view");
    return store_->at(name);
  }

private:
  const ParamStore* store_ = nullptr;
  const std::unordered_map<std::string, Tensor>* watched_ = nullptr;
};

// Tape-registered copies of every parameter, for one forward/backward pass.
struct WatchedParams {
  std::unordered_map<std::string, Tensor> tensors;

  ParamView view() const { return ParamView(&tensors); }

  // Gradients accumulated by the last backward; zero for unreached leaves.
  std::map<std::string, std::vector<double>> grads() const {
    std::map<std::string, std::vector<double>> out;
    for (const auto& [name, t] : tensors) out[name] = t.grad();
    return out;
  }
};

inline WatchedParams watch(Tape& tape, const ParamStore& params) {
  WatchedParams w;
  for (const auto& name : params.names()) w.tensors.emplace(name, tape.leaf(params.at(name)));
  return w;
}

}  // namespace pcf
