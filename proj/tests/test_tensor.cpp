#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using namespace pcf;
using pcftest::max_gradcheck_error;
using pcftest::projection_weights;
using pcftest::rand_tensor;
using pcftest::rand_tensor_nonzero;

namespace {
constexpr double kGradTol = 1e-4;
}

TEST_CASE("matmul basics") {
  const Tensor eye({2, 2}, {1, 0, 0, 1});
  const Tensor a({2, 2}, {1, 2, 3, 4});
  CHECK(matmul(eye, a).values() == std::vector<double>{1, 2, 3, 4});

  const Tensor row({1, 2}, {1, 2});
  const Tensor col({2, 1}, {3, 4});
  CHECK(matmul(row, col).values() == std::vector<double>{11});

  CHECK(matmul(Tensor::zeros({2, 3}), Tensor::full({3, 2}, 1.0)).values() ==
        std::vector<double>(4, 0.0));

  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 2}));
    FAIL("expected dimension error");
  } catch (const Error& e) {
    CHECK(e.code() == "DIMENSION_MISMATCH");
    CHECK(std::string(e.what()).find("[2x3]") != std::string::npos);
    CHECK(std::string(e.what()).find("[2x2]") != std::string::npos);
  }
}

TEST_CASE("elementwise basics") {
  CHECK(relu(Tensor({3}, {-1, 0, 2})).values() == std::vector<double>{0, 0, 2});
  CHECK(sigmoid(Tensor::scalar(0.0)).value() == 0.5);
  CHECK_THAT(sigmoid(Tensor::scalar(1.0)).value(),
             Catch::Matchers::WithinAbs(0.73106, 1e-5));

  // scalar and equal-shape broadcasting only
  const Tensor v({3}, {1, 2, 3});
  CHECK(add(v, Tensor::scalar(1.0)).values() == std::vector<double>{2, 3, 4});
  CHECK(mul(v, v).values() == std::vector<double>{1, 4, 9});
  CHECK(sub(v, v).values() == std::vector<double>{0, 0, 0});
  CHECK_THROWS_AS(add(v, Tensor({2}, {1, 2})), Error);
}

TEST_CASE("max_pool_groups forward and tie rule") {
  // one group, two neighbors, two channels
  const Tensor x({1, 2, 2}, {1, 5, 3, 2});
  CHECK(max_pool_groups(x).values() == std::vector<double>{3, 5});

  // single neighbor: identity
  const Tensor single({2, 1, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(max_pool_groups(single).values() == std::vector<double>{1, 2, 3, 4, 5, 6});

  // all-equal neighbors: value kept, gradient to index 0
  Tape tape;
  Tensor eq = tape.leaf(Tensor({1, 3, 1}, {7, 7, 7}));
  Tensor pooled = max_pool_groups(eq);
  CHECK(pooled.values() == std::vector<double>{7});
  tape.backward(sum_all(pooled));
  CHECK(eq.grad() == std::vector<double>{1, 0, 0});

  CHECK_THROWS_AS(max_pool_groups(Tensor({2, 2}, {1, 2, 3, 4})), Error);
}

TEST_CASE("max_pool gradient is one-hot per center/channel") {
  Rng rng(11);
  const Tensor x = rand_tensor({4, 5, 3}, rng);
  Tape tape;
  Tensor leaf = tape.leaf(x);
  Tensor pooled = max_pool_groups(leaf);
  const Tensor w = projection_weights({4, 3}, rng);
  tape.backward(sum_all(mul(pooled, w)));
  const auto& g = leaf.grad();
  for (size_t m = 0; m < 4; ++m)
    for (size_t c = 0; c < 3; ++c) {
      size_t nonzero = 0;
      double total = 0.0;
      for (size_t k = 0; k < 5; ++k) {
        const double v = g[(m * 5 + k) * 3 + c];
        nonzero += v != 0.0;
        total += v;
      }
      CHECK(nonzero <= 1);
      CHECK_THAT(total, Catch::Matchers::WithinAbs(w.values()[m * 3 + c], 1e-12));
    }
}

TEST_CASE("bce values") {
  CHECK_THAT(bce(Tensor::scalar(0.5), Tensor::scalar(1.0)).value(),
             Catch::Matchers::WithinAbs(0.69315, 1e-5));
  CHECK(bce(Tensor::scalar(1.0 - 1e-7), Tensor::scalar(1.0)).value() < 1e-6);

  // mixed targets, pred 0.5 everywhere, mean
  const Tensor pred = Tensor::full({4}, 0.5);
  const Tensor target({4}, {1, 0, 1, 0});
  CHECK_THAT(bce(pred, target).value(), Catch::Matchers::WithinAbs(0.69315, 1e-5));

  // reduction none keeps the shape
  CHECK(bce(pred, target, Reduction::none).shape() == std::vector<size_t>{4});

  try {
    bce(Tensor::scalar(0.5), Tensor::scalar(0.25));
    FAIL("expected validation error");
  } catch (const Error& e) {
    CHECK(e.code() == "VALIDATION");
  }
}

TEST_CASE("adamw examples") {
  SECTION("zero gradient, zero decay") {
    ParamStore params;
    params.add("p", Tensor::scalar(1.0));
    AdamW opt({1e-4, 0.9, 0.999, 1e-8, 0.0});
    opt.step(params, {{"p", {0.0}}});
    CHECK(params.at("p").value() == 1.0);
  }
  SECTION("one step with unit gradient") {
    ParamStore params;
    params.add("p", Tensor::scalar(1.0));
    AdamW opt({1e-4, 0.9, 0.999, 1e-8, 0.0});
    opt.step(params, {{"p", {1.0}}});
    CHECK_THAT(params.at("p").value(), Catch::Matchers::WithinAbs(0.9999, 1e-8));
  }
  SECTION("decoupled decay with zero gradient") {
    ParamStore params;
    params.add("p", Tensor::scalar(1.0));
    AdamW opt({1e-4, 0.9, 0.999, 1e-8, 5e-4});
    opt.step(params, {{"p", {0.0}}});
    CHECK_THAT(params.at("p").value(), Catch::Matchers::WithinAbs(0.99999995, 1e-12));
  }
  SECTION("non-finite gradient names the parameter") {
    ParamStore params;
    params.add("bad_param", Tensor::scalar(1.0));
    AdamW opt;
    try {
      opt.step(params, {{"bad_param", {std::numeric_limits<double>::quiet_NaN()}}});
      FAIL("expected training error");
    } catch (const Error& e) {
      CHECK(e.code() == "TRAINING");
      CHECK(std::string(e.what()).find("bad_param") != std::string::npos);
    }
  }
}

TEST_CASE("gradient checks for every op") {
  Rng rng(1234);

  SECTION("add/sub/mul/div, equal shape") {
    const Tensor a = rand_tensor({3, 4}, rng);
    const Tensor b = rand_tensor_nonzero({3, 4}, rng, 0.3);
    const Tensor w = projection_weights({3, 4}, rng);
    for (auto op : {add, sub, mul, div}) {
      const double err = max_gradcheck_error({a, b}, [&](const std::vector<Tensor>& in) {
        return sum_all(mul(op(in[0], in[1]), w));
      });
      CHECK(err < kGradTol);
    }
  }

  SECTION("scalar broadcasting") {
    const Tensor a = rand_tensor({5}, rng);
    const Tensor s = Tensor::scalar(0.7);
    const Tensor w = projection_weights({5}, rng);
    const double err = max_gradcheck_error({a, s}, [&](const std::vector<Tensor>& in) {
      return sum_all(mul(add(mul(in[0], in[1]), in[1]), w));
    });
    CHECK(err < kGradTol);
  }

  SECTION("relu away from the kink") {
    const Tensor x = rand_tensor_nonzero({4, 4}, rng);
    const Tensor w = projection_weights({4, 4}, rng);
    CHECK(max_gradcheck_error({x}, [&](const std::vector<Tensor>& in) {
            return sum_all(mul(relu(in[0]), w));
          }) < kGradTol);
  }

  SECTION("sigmoid, sqrt, scale") {
    const Tensor x = rand_tensor({6}, rng);
    const Tensor pos = rand_tensor({6}, rng, 0.2, 1.5);
    const Tensor w = projection_weights({6}, rng);
    CHECK(max_gradcheck_error({x}, [&](const std::vector<Tensor>& in) {
            return sum_all(mul(sigmoid(in[0]), w));
          }) < kGradTol);
    CHECK(max_gradcheck_error({pos}, [&](const std::vector<Tensor>& in) {
            return sum_all(mul(sqrt(in[0]), w));
          }) < kGradTol);
    CHECK(max_gradcheck_error({x}, [&](const std::vector<Tensor>& in) {
            return sum_all(mul(scale(in[0], -2.5), w));
          }) < kGradTol);
  }

  SECTION("matmul and add_bias") {
    const Tensor a = rand_tensor({3, 4}, rng);
    const Tensor b = rand_tensor({4, 2}, rng);
    const Tensor bias = rand_tensor({2}, rng);
    const Tensor w = projection_weights({3, 2}, rng);
    CHECK(max_gradcheck_error({a, b, bias}, [&](const std::vector<Tensor>& in) {
            return sum_all(mul(add_bias(matmul(in[0], in[1]), in[2]), w));
          }) < kGradTol);
  }

  SECTION("max_pool_groups with distinct values") {
    const Tensor x = rand_tensor({3, 4, 2}, rng);
    const Tensor w = projection_weights({3, 2}, rng);
    CHECK(max_gradcheck_error({x}, [&](const std::vector<Tensor>& in) {
            return sum_all(mul(max_pool_groups(in[0]), w));
          }) < kGradTol);
  }

  SECTION("bce in the open interval") {
    const Tensor pred = rand_tensor({6}, rng, 0.05, 0.95);
    const Tensor target({6}, {1, 0, 0, 1, 1, 0});
    CHECK(max_gradcheck_error({pred}, [&](const std::vector<Tensor>& in) {
            return bce(in[0], target);
          }) < kGradTol);
    CHECK(max_gradcheck_error({pred}, [&](const std::vector<Tensor>& in) {
            return mean_all(bce(in[0], target, Reduction::none));
          }) < kGradTol);
  }

  SECTION("gather, concat, reshape, reductions") {
    const Tensor x = rand_tensor({5, 3}, rng);
    const Tensor y = rand_tensor({5, 2}, rng);
    const std::vector<size_t> rows = {4, 0, 2, 2};
    const Tensor w = projection_weights({4, 5}, rng);
    CHECK(max_gradcheck_error({x, y}, [&](const std::vector<Tensor>& in) {
            return sum_all(mul(gather_rows(concat_cols({in[0], in[1]}), rows), w));
          }) < kGradTol);

    const Tensor w2 = projection_weights({10, 3}, rng);
    CHECK(max_gradcheck_error({x}, [&](const std::vector<Tensor>& in) {
            return sum_all(mul(concat_rows({in[0], in[0]}), w2));
          }) < kGradTol);

    CHECK(max_gradcheck_error({x}, [&](const std::vector<Tensor>& in) {
            return mean_all(reshape(in[0], {3, 5}));
          }) < kGradTol);
  }

  SECTION("rowwise_l2, cross3, min2") {
    const Tensor x = rand_tensor_nonzero({4, 3}, rng, 0.2);
    const Tensor w = projection_weights({4}, rng);
    CHECK(max_gradcheck_error({x}, [&](const std::vector<Tensor>& in) {
            return sum_all(mul(rowwise_l2(in[0]), w));
          }) < kGradTol);

    const Tensor u = rand_tensor({3}, rng);
    const Tensor v = rand_tensor({3}, rng);
    const Tensor w3 = projection_weights({3}, rng);
    CHECK(max_gradcheck_error({u, v}, [&](const std::vector<Tensor>& in) {
            return sum_all(mul(cross3(in[0], in[1]), w3));
          }) < kGradTol);

    const Tensor a = Tensor::scalar(0.4);
    const Tensor b = Tensor::scalar(0.9);
    CHECK(max_gradcheck_error({a, b}, [&](const std::vector<Tensor>& in) {
            return min2(mul(in[0], in[0]), mul(in[1], in[1]));
          }) < kGradTol);
  }

  SECTION("weighted_rows") {
    const Tensor x = rand_tensor({6, 3}, rng);
    const std::vector<size_t> idx = {0, 1, 2, 5, 4, 3};
    const std::vector<double> wts = {0.2, 0.3, 0.5, 0.1, 0.6, 0.3};
    const Tensor w = projection_weights({2, 3}, rng);
    CHECK(max_gradcheck_error({x}, [&](const std::vector<Tensor>& in) {
            return sum_all(mul(weighted_rows(in[0], idx, wts, 2), w));
          }) < kGradTol);
  }

  SECTION("composed toy network") {
    const Tensor x = rand_tensor({4, 3}, rng);
    const Tensor w1 = rand_tensor({3, 5}, rng);
    const Tensor b1 = rand_tensor({5}, rng);
    const Tensor w2 = rand_tensor({5, 1}, rng);
    const Tensor b2 = rand_tensor({1}, rng);
    const Tensor target({4, 1}, {1, 0, 1, 0});
    const double err =
        max_gradcheck_error({x, w1, b1, w2, b2}, [&](const std::vector<Tensor>& in) {
          Tensor h = relu(add_bias(matmul(in[0], in[1]), in[2]));
          Tensor p = sigmoid(add_bias(matmul(h, in[3]), in[4]));
          return bce(p, target);
        });
    CHECK(err < kGradTol);
  }
}

TEST_CASE("tape determinism") {
  Rng rng(77);
  const Tensor x = rand_tensor({8, 8}, rng);
  const Tensor w = rand_tensor({8, 8}, rng);
  const auto run = [&] {
    Tape tape;
    Tensor xl = tape.leaf(x);
    Tensor wl = tape.leaf(w);
    Tensor h = relu(matmul(xl, wl));
    Tensor loss = mean_all(mul(h, h));
    tape.backward(loss);
    return std::pair{xl.grad(), wl.grad()};
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.first == b.first);    // bit-identical
  CHECK(a.second == b.second);
}

TEST_CASE("tensor shape validation") {
  CHECK_THROWS_AS(Tensor({2, 3}, {1.0, 2.0}), Error);
  CHECK_THROWS_AS(Tensor({2}, {1.0, 2.0}).value(), Error);
  CHECK(Tensor::scalar(3.5).value() == 3.5);
}

TEST_CASE("checkpoint round trip") {
  Rng rng(5);
  ParamStore params;
  params.add("layer.W", rand_tensor({4, 3}, rng));
  params.add("layer.b", rand_tensor({3}, rng));
  params.add("head.W", rand_tensor({3, 1}, rng));

  const auto dir = std::filesystem::temp_directory_path() / "pcfgrasp_test_ckpt";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "params.pcfg").string();
  save_checkpoint(path, params);
  const ParamStore loaded = load_checkpoint(path);

  REQUIRE(loaded.names() == params.names());
  for (const auto& name : params.names()) {
    CHECK(loaded.at(name).shape() == params.at(name).shape());
    CHECK(loaded.at(name).values() == params.at(name).values());
  }

  try {
    load_checkpoint((dir / "missing.pcfg").string());
    FAIL("expected checkpoint error");
  } catch (const Error& e) {
    CHECK(e.code() == "CHECKPOINT_MISSING");
  }
}
