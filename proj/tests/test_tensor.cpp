#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "trialnet/optim.hpp"
#include "trialnet/param_store.hpp"
#include "trialnet/tensor.hpp"

using namespace trialnet;

namespace {

TensorPtr rand_tensor(Shape shape, Rng& rng, double kink_margin = 0.0,
                      bool requires_grad = true) {
  auto t = zeros(std::move(shape), requires_grad);
  for (double& v : t->values) {
    v = rng.uniform(-2.0, 2.0);
    if (kink_margin > 0.0 && std::fabs(v) < kink_margin)
      v = v < 0.0 ? v - kink_margin : v + kink_margin;
  }
  return t;
}

}  // namespace

TEST_CASE("matmul identity cases") {
  Tape tape;
  auto a = make_tensor({2, 2}, {1, 2, 3, 4});
  auto i2 = make_tensor({2, 2}, {1, 0, 0, 1});
  auto out = tape.matmul(a, i2);
  CHECK(out->values == std::vector<double>{1, 2, 3, 4});

  auto col = make_tensor({2, 1}, {5, 7});
  auto out2 = tape.matmul(i2, col);
  CHECK(out2->values == std::vector<double>{5, 7});
}

TEST_CASE("matmul shape errors name both shapes") {
  Tape tape;
  auto a = zeros({3, 4});
  auto b = zeros({5, 2});
  CHECK_THROWS_WITH_AS(tape.matmul(a, b),
                       doctest::Contains("{3,4}"), std::invalid_argument);
}

TEST_CASE("matmul gradient of sum equals ones times b-transpose") {
  Rng rng(11);
  auto a = rand_tensor({3, 4}, rng);
  auto b = rand_tensor({4, 2}, rng);
  Tape tape;
  auto loss = tape.sum(tape.matmul(a, b));
  tape.backward(loss);
  // d(sum)/dA = ones(3,2) * B^T, i.e. dA[i][k] = sum_j B[k][j].
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 4; ++k) {
      double expect = b->values[k * 2] + b->values[k * 2 + 1];
      CHECK(a->grad[i * 4 + k] == doctest::Approx(expect).epsilon(1e-12));
    }

  auto report = grad_check(
      [](Tape& t, const std::vector<TensorPtr>& in) {
        return t.sum(t.matmul(in[0], in[1]));
      },
      {a, b}, 1e-5);
  CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("elementwise analytic values") {
  Tape tape;
  CHECK(tape.sigmoid(make_scalar(0.0))->scalar() == 0.5);
  auto r = tape.relu(make_vector({-3.0, 2.0}));
  CHECK(r->values[0] == 0.0);
  CHECK(r->values[1] == 2.0);

  // d(sigmoid)/dx at 0 is exactly 0.25.
  auto x = make_scalar(0.0, true);
  Tape t2;
  auto y = t2.sigmoid(x);
  t2.backward(y);
  CHECK(x->grad[0] == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("elementwise shape mismatch is an error") {
  Tape tape;
  CHECK_THROWS_AS(tape.add(zeros({2}), zeros({3})), std::invalid_argument);
  CHECK_THROWS_AS(tape.mul(zeros({2, 2}), zeros({4})), std::invalid_argument);
}

TEST_CASE("conv1d single position equals a linear map of the row") {
  Rng rng(5);
  auto x = rand_tensor({1, 6}, rng);
  auto w = rand_tensor({4, 6}, rng);
  auto b = rand_tensor({4}, rng);
  Tape tape;
  auto out = tape.conv1d_max(x, w, b, 1);
  for (std::size_t c = 0; c < 4; ++c) {
    double expect = b->values[c];
    for (std::size_t j = 0; j < 6; ++j)
      expect += w->values[c * 6 + j] * x->values[j];
    CHECK(out->values[c] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("conv1d zero input and zero bias give zero output") {
  Tape tape;
  auto out = tape.conv1d_max(zeros({3, 5}), zeros({2, 15}), zeros({2}), 3);
  for (double v : out->values) CHECK(v == 0.0);
}

TEST_CASE("conv1d rejects zero kernel") {
  Tape tape;
  CHECK_THROWS_AS(tape.conv1d_max(zeros({3, 5}), zeros({2, 0}), zeros({2}), 0),
                  std::invalid_argument);
}

TEST_CASE("conv1d gradient matches finite differences") {
  Rng rng(7);
  auto x = rand_tensor({5, 4}, rng);
  auto w = rand_tensor({3, 12}, rng);
  auto b = rand_tensor({3}, rng);
  auto report = grad_check(
      [](Tape& t, const std::vector<TensorPtr>& in) {
        return t.sum(t.conv1d_max(in[0], in[1], in[2], 3));
      },
      {x, w, b}, 1e-5);
  CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("bce analytic values and clamping") {
  Tape tape;
  CHECK(tape.bce_loss(make_scalar(0.5), 1.0)->scalar() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(tape.bce_loss(make_scalar(1.0), 1.0)->scalar() ==
        doctest::Approx(0.0).epsilon(1e-9));
  CHECK(tape.bce_loss(make_scalar(0.9), 0.0)->scalar() ==
        doctest::Approx(-std::log(0.1)).epsilon(1e-12));
  CHECK_THROWS_AS(tape.bce_loss(make_scalar(0.5), 2.0),
                  std::invalid_argument);

  // Clamped BCE stays finite across the whole closed interval.
  for (double p : {0.0, 1e-300, 1e-15, 0.3, 1.0 - 1e-15, 1.0}) {
    for (double y : {0.0, 1.0}) {
      auto yh = make_scalar(p, true);
      Tape t2;
      auto loss = t2.bce_loss(yh, y);
      t2.backward(loss);
      CHECK(std::isfinite(loss->scalar()));
      CHECK(std::isfinite(yh->grad[0]));
    }
  }
}

TEST_CASE("mse values and gradient") {
  Tape tape;
  auto v = make_vector({1.5, -2.0, 0.25});
  CHECK(tape.mse_loss(v, v)->scalar() == 0.0);
  CHECK(tape.mse_loss(make_vector({1, 2}), make_vector({0, 0}))->scalar() ==
        5.0);
  CHECK_THROWS_AS(tape.mse_loss(zeros({2}), zeros({3})),
                  std::invalid_argument);

  Rng rng(3);
  auto a = rand_tensor({6}, rng);
  auto b = rand_tensor({6}, rng, 0.0, false);
  Tape t2;
  auto loss = t2.mse_loss(a, b);
  t2.backward(loss);
  for (std::size_t i = 0; i < 6; ++i)
    CHECK(a->grad[i] ==
          doctest::Approx(2.0 * (a->values[i] - b->values[i])).epsilon(1e-12));
}

TEST_CASE("adam zero gradient leaves parameters unchanged") {
  ParameterStore store(1);
  auto w = store.create("w", {4});
  const auto before = w->values;
  store.zero_grad();
  Adam adam;
  adam.step(store);
  CHECK(w->values == before);
}

TEST_CASE("adam first step moves by about minus lr") {
  ParameterStore store(1);
  auto w = store.create("w", {1}, Init::kZero);
  w->values[0] = 0.7;
  store.zero_grad();
  w->grad[0] = 1.0;
  Adam adam({1e-3});
  adam.step(store);
  CHECK(w->values[0] == doctest::Approx(0.7 - 1e-3).epsilon(1e-6));
}

TEST_CASE("adam strictly decreases a quadratic") {
  ParameterStore store(1);
  auto w = store.create("w", {1}, Init::kZero);
  w->values[0] = 1.0;
  Adam adam({0.01});
  double prev = 1.0;
  for (int i = 0; i < 10; ++i) {
    store.zero_grad();
    w->grad[0] = 2.0 * w->values[0];
    adam.step(store);
    const double f = w->values[0] * w->values[0];
    CHECK(f < prev);
    prev = f;
  }
}

TEST_CASE("adam requires gradients for selected parameters") {
  ParameterStore store(1);
  store.create("w", {2});
  Adam adam;
  CHECK_THROWS_AS(adam.step(store), std::invalid_argument);
}

TEST_CASE("grad_check validates its own contract") {
  auto f = [](Tape& t, const std::vector<TensorPtr>& in) {
    return t.sum(in[0]);
  };
  CHECK_THROWS_AS(grad_check(f, {rand_tensor({2}, *(new Rng(1)))}, 1e-2),
                  std::invalid_argument);
  auto vec_f = [](Tape& t, const std::vector<TensorPtr>& in) {
    return t.relu(in[0]);
  };
  Rng rng(2);
  CHECK_THROWS_AS(grad_check(vec_f, {rand_tensor({2}, rng)}, 1e-5),
                  std::invalid_argument);
}

TEST_CASE("grad_check on exact polynomial is tight") {
  Rng rng(13);
  auto x = rand_tensor({8}, rng);
  auto report = grad_check(
      [](Tape& t, const std::vector<TensorPtr>& in) {
        return t.mse_loss(in[0], zeros({8}));
      },
      {x}, 1e-5);
  CHECK(report.max_rel_error < 1e-6);
}

TEST_CASE("grad_check on sigmoid of a dot product") {
  Rng rng(17);
  auto w = rand_tensor({1, 10}, rng);
  auto x = rand_tensor({10}, rng);
  auto report = grad_check(
      [](Tape& t, const std::vector<TensorPtr>& in) {
        return t.sigmoid(t.matvec(in[0], in[1]));
      },
      {w, x}, 1e-5);
  CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("every primitive passes a finite-difference check") {
  Rng rng(23);
  const double eps = 1e-5;
  const auto check = [&](const char* name,
                         std::function<TensorPtr(
                             Tape&, const std::vector<TensorPtr>&)> f,
                         std::vector<TensorPtr> inputs) {
    INFO(name);
    auto report = grad_check(f, inputs, eps);
    CHECK(report.max_rel_error < 1e-4);
  };

  check("add",
        [](Tape& t, const std::vector<TensorPtr>& in) {
          return t.sum(t.add(in[0], in[1]));
        },
        {rand_tensor({3, 4}, rng), rand_tensor({3, 4}, rng)});
  check("sub",
        [](Tape& t, const std::vector<TensorPtr>& in) {
          return t.mse_loss(t.sub(in[0], in[1]), zeros({5}));
        },
        {rand_tensor({5}, rng), rand_tensor({5}, rng)});
  check("mul",
        [](Tape& t, const std::vector<TensorPtr>& in) {
          return t.sum(t.mul(in[0], in[1]));
        },
        {rand_tensor({4}, rng), rand_tensor({4}, rng)});
  check("scale_one_minus",
        [](Tape& t, const std::vector<TensorPtr>& in) {
          return t.sum(t.one_minus(t.scale(in[0], -1.7)));
        },
        {rand_tensor({6}, rng)});
  check("relu",
        [](Tape& t, const std::vector<TensorPtr>& in) {
          return t.sum(t.relu(in[0]));
        },
        {rand_tensor({12}, rng, 1e-3)});
  check("sigmoid",
        [](Tape& t, const std::vector<TensorPtr>& in) {
          return t.sum(t.sigmoid(in[0]));
        },
        {rand_tensor({12}, rng)});
  check("matvec",
        [](Tape& t, const std::vector<TensorPtr>& in) {
          return t.sum(t.matvec(in[0], in[1]));
        },
        {rand_tensor({3, 5}, rng), rand_tensor({5}, rng)});
  check("vecmat",
        [](Tape& t, const std::vector<TensorPtr>& in) {
          return t.sum(t.vecmat(in[0], in[1]));
        },
        {rand_tensor({4}, rng), rand_tensor({4, 3}, rng)});
  check("add_row_bias",
        [](Tape& t, const std::vector<TensorPtr>& in) {
          return t.sum(t.sigmoid(t.add_row_bias(in[0], in[1])));
        },
        {rand_tensor({3, 4}, rng), rand_tensor({4}, rng)});
  check("concat",
        [](Tape& t, const std::vector<TensorPtr>& in) {
          return t.mse_loss(t.concat({in[0], in[1]}), zeros({7}));
        },
        {rand_tensor({3}, rng), rand_tensor({4}, rng)});
  check("concat_cols",
        [](Tape& t, const std::vector<TensorPtr>& in) {
          return t.sum(t.sigmoid(t.concat_cols(in[0], in[1])));
        },
        {rand_tensor({2, 3}, rng), rand_tensor({2, 2}, rng)});
  check("stack_rows_row",
        [](Tape& t, const std::vector<TensorPtr>& in) {
          auto m = t.stack_rows({in[0], in[1], in[0]});
          return t.sum(t.sigmoid(t.row(m, 2)));
        },
        {rand_tensor({4}, rng), rand_tensor({4}, rng)});
  check("gather_rows",
        [](Tape& t, const std::vector<TensorPtr>& in) {
          return t.sum(t.sigmoid(t.gather_rows(in[0], {0, 2, 2, 1})));
        },
        {rand_tensor({3, 4}, rng)});
  check("reshape",
        [](Tape& t, const std::vector<TensorPtr>& in) {
          return t.sum(t.sigmoid(t.reshape(in[0], {6})));
        },
        {rand_tensor({2, 3}, rng)});
  check("mean_rows",
        [](Tape& t, const std::vector<TensorPtr>& in) {
          return t.mse_loss(t.mean_rows(in[0]), zeros({3}));
        },
        {rand_tensor({4, 3}, rng)});
  check("max_rows",
        [](Tape& t, const std::vector<TensorPtr>& in) {
          return t.sum(t.max_rows(in[0]));
        },
        {rand_tensor({4, 3}, rng, 1e-3)});
  check("sum_grouped_rows",
        [](Tape& t, const std::vector<TensorPtr>& in) {
          return t.sum(t.sigmoid(t.sum_grouped_rows(in[0], {1, 0, 1, 1}, 2)));
        },
        {rand_tensor({4, 3}, rng)});
  check("softmax",
        [](Tape& t, const std::vector<TensorPtr>& in) {
          return t.mse_loss(t.softmax(in[0]), zeros({5}));
        },
        {rand_tensor({5}, rng)});
  check("conv1d_max",
        [](Tape& t, const std::vector<TensorPtr>& in) {
          return t.sum(t.conv1d_max(in[0], in[1], in[2], 3));
        },
        {rand_tensor({6, 3}, rng), rand_tensor({2, 9}, rng),
         rand_tensor({2}, rng)});
  check("bce",
        [](Tape& t, const std::vector<TensorPtr>& in) {
          return t.bce_loss(t.sigmoid(t.sum(in[0])), 1.0);
        },
        {rand_tensor({3}, rng)});
  check("dropout_fixed_mask",
        [](Tape& t, const std::vector<TensorPtr>& in) {
          Rng mask_rng(99);  // same mask on every evaluation
          return t.sum(t.dropout(in[0], 0.4, mask_rng));
        },
        {rand_tensor({10}, rng)});
}

TEST_CASE("dropout semantics") {
  Rng data_rng(31);
  auto x = rand_tensor({1000}, data_rng, 1e-3, false);
  Tape tape;
  Rng mask_rng(7);
  auto y = tape.dropout(x, 0.6, mask_rng);
  std::size_t kept = 0;
  for (std::size_t i = 0; i < x->size(); ++i) {
    if (y->values[i] != 0.0) {
      ++kept;
      CHECK(y->values[i] ==
            doctest::Approx(x->values[i] / 0.4).epsilon(1e-12));
    }
  }
  CHECK(kept > 300);
  CHECK(kept < 500);

  Rng mask_rng2(7);
  auto same = tape.dropout(x, 0.0, mask_rng2);
  CHECK(same->values == x->values);
}

TEST_CASE("tensor invariants") {
  CHECK_THROWS_AS(make_tensor({2, 3}, {1.0, 2.0}), std::invalid_argument);
  auto t = make_tensor({2}, {1.0, std::nan("")});
  CHECK_FALSE(t->all_finite());
  CHECK(make_vector({0.0, 1.0})->all_finite());
  auto g = zeros({3}, true);
  g->ensure_grad();
  CHECK(g->grad.size() == g->values.size());
}

TEST_CASE("parameter store determinism and ordering") {
  ParameterStore a(42), b(42), c(43);
  auto w1 = a.create("net/w", {8, 4});
  auto w2 = b.create("net/w", {8, 4});
  auto w3 = c.create("net/w", {8, 4});
  CHECK(w1->values == w2->values);
  CHECK(w1->values != w3->values);

  // Creation order does not affect initialization.
  ParameterStore d(42);
  d.create("zzz", {3});
  auto w4 = d.create("net/w", {8, 4});
  CHECK(w4->values == w1->values);

  a.create("aaa/w", {2});
  std::vector<std::string> order;
  for (const auto& [path, t] : a.params()) order.push_back(path);
  CHECK(order == std::vector<std::string>{"aaa/w", "net/w"});

  CHECK_THROWS_AS(a.create("net/w", {2}), std::invalid_argument);

  // Uniform fan-in bound.
  for (double v : w1->values) CHECK(std::fabs(v) <= 0.5);
}

TEST_CASE("checkpoint round-trip is bit-exact") {
  namespace fs = std::filesystem;
  ParameterStore store(7);
  store.create("a/w", {3, 2});
  store.create("a/b", {3}, Init::kZero)->values = {0.1, -0.25, 1e-17};
  store.create("z", {2, 2, 2});

  const fs::path file = fs::temp_directory_path() / "trialnet_ckpt_test.bin";
  store.save(file);
  ParameterStore loaded = ParameterStore::load_file(file);
  REQUIRE(loaded.params().size() == 3);
  for (const auto& [path, t] : store.params()) {
    auto lt = loaded.at(path);
    CHECK(lt->shape == t->shape);
    CHECK(lt->values == t->values);
  }
  fs::remove(file);
}

TEST_CASE("overlay copies matching paths and flags mismatches") {
  ParameterStore a(1), b(2);
  a.create("w", {2, 2});
  a.create("table", {3, 4});
  b.create("w", {2, 2});
  b.create("table", {5, 4});
  b.create("extra", {1});

  ParameterStore target(1);
  target.create("w", {2, 2});
  target.create("table", {3, 4});
  CHECK_THROWS_AS(target.overlay(b), std::runtime_error);
  CHECK(target.overlay(b, {"table"}) == 2);
  for (std::size_t i = 0; i < 12; ++i)
    CHECK(target.at("table")->values[i] == b.at("table")->values[i]);
}

TEST_CASE("two identically seeded training runs are bit-identical") {
  const auto run = [](std::uint64_t seed) {
    ParameterStore store(seed);
    auto w = store.create("w", {4, 4});
    auto x = store.create("x", {4});
    Adam adam({1e-2});
    for (int i = 0; i < 25; ++i) {
      Tape tape;
      store.zero_grad();
      auto y = tape.mse_loss(tape.sigmoid(tape.matvec(w, x)), zeros({4}));
      tape.backward(y);
      adam.step(store);
    }
    return std::make_pair(w->values, x->values);
  };
  auto r1 = run(123);
  auto r2 = run(123);
  CHECK(r1.first == r2.first);
  CHECK(r1.second == r2.second);
}
