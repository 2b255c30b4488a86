#pragma once

// Shared test utilities: random tensors and the central finite-difference
// gradient check (h = 1e-5, relative error threshold 1e-4).

#include <algorithm>
#include <cmath>
#include <vector>

#include "pcf/pcf.hpp"

namespace pcftest {

using namespace pcf;

inline Tensor rand_tensor(std::vector<size_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> data(detail::shape_product(shape));
  for (double& v : data) v = u(rng);
  return Tensor(std::move(shape), std::move(data));
}

// Random values in [-1,1] kept away from zero, for kinked ops like relu.
inline Tensor rand_tensor_nonzero(std::vector<size_t> shape, Rng& rng, double margin = 0.05) {
  std::uniform_real_distribution<double> u(-0.95, 0.95);
  std::vector<double> data(detail::shape_product(shape));
  for (double& v : data) {
    const double x = u(rng);
    v = x >= 0.0 ? x + margin : x - margin;
  }
  return Tensor(std::move(shape), std::move(data));
}

// make_loss must produce a scalar from the given tensors, which are either
// tape leaves (analytic pass) or plain values (finite-difference passes).
template <class MakeLoss>
double max_gradcheck_error(const std::vector<Tensor>& inputs, MakeLoss&& make_loss,
                           double h = 1e-5) {
  Tape tape;
  std::vector<Tensor> taped;
  taped.reserve(inputs.size());
  for (const Tensor& t : inputs) taped.push_back(tape.leaf(t));
  Tensor loss = make_loss(taped);
  tape.backward(loss);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(taped.size());
  for (const Tensor& t : taped) analytic.push_back(t.grad());

  double max_err = 0.0;
  for (size_t which = 0; which < inputs.size(); ++which) {
    for (size_t i = 0; i < inputs[which].size(); ++i) {
      const auto eval = [&](double delta) {
        std::vector<Tensor> mod = inputs;
        std::vector<double> data = inputs[which].values();
        data[i] += delta;
        mod[which] = Tensor(inputs[which].shape(), std::move(data));
        return make_loss(mod).value();
      };
      const double numeric = (eval(h) - eval(-h)) / (2.0 * h);
      const double a = analytic[which][i];
      const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

// Fixed random projection weights; combine an op output into a scalar with
// sum_all(mul(out, weights)) so gradcheck can run through it.
inline Tensor projection_weights(std::vector<size_t> shape, Rng& rng) {
  return rand_tensor(std::move(shape), rng, -1.0, 1.0);
}

}  // namespace pcftest
