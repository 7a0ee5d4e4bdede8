#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "rinr/error.hpp"
#include "rinr/inr_net.hpp"
#include "support.hpp"

using namespace rinr;

namespace {

// Independent reference: plain MSE over a forward pass.
double mse_of(const InrModelD& m, const CoordinateGrid& g, const std::vector<double>& t) {
  const auto y = forward<double>(m, g);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - t[i]) * (y[i] - t[i]);
  return s / static_cast<double>(y.size());
}

}  // namespace

TEST_CASE("architecture shapes and parameter counts") {
  CHECK(param_count(Architecture{{2, 1, 3}}) == 9);
  CHECK(param_count(Architecture::from_layers(3, 15)) == 333);
  CHECK(weight_count(Architecture::from_layers(3, 15)) == 2 * 15 + 15 * 15 + 15 * 3);
  CHECK(param_count(Architecture::from_layers(10, 40)) == 13363);
  CHECK(Architecture::from_layers(3, 15).dims == std::vector<int>{2, 15, 15, 3});
  CHECK(Architecture::from_layers(1, 0).dims == std::vector<int>{2, 3});
  CHECK(Architecture::from_layers(3, 15).label() == "2-15-15-3");

  CHECK_THROWS_AS((Architecture{{3, 4, 3}}.validate()), InvalidInput);
  CHECK_THROWS_AS((Architecture{{2, 4, 2}}.validate()), InvalidInput);
  CHECK_THROWS_AS(Architecture{{2}}.validate(), InvalidInput);
  CHECK_THROWS_AS((Architecture{{2, 0, 3}}.validate()), InvalidInput);
  CHECK_THROWS_AS((Architecture{{2, 3}, 0.0}.validate()), InvalidInput);
  CHECK_THROWS_AS((Architecture{{2, 3}, -1.0}.validate()), InvalidInput);
}

TEST_CASE("init: structure, ranges, determinism") {
  const Architecture tiny{{2, 1, 3}};
  const auto m = init(tiny, 7);
  CHECK(m.layers.size() == 2);
  for (const auto& L : m.layers)
    for (float b : L.b) CHECK(b == 0.0f);
  for (const auto& mk : m.mask)
    for (auto v : mk) CHECK(v == 1);

  const auto arch = Architecture::from_layers(4, 20);
  const auto a = init(arch, 42);
  const auto b = init(arch, 42);
  const auto c = init(arch, 43);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    const double in = a.layers[l].in;
    const double bound = l == 0 ? 1.0 / in : std::sqrt(6.0 / in) / arch.omega;
    for (float w : a.layers[l].w) CHECK(std::fabs(w) <= bound);
  }
}

TEST_CASE("coordinate grid conventions") {
  const auto g = CoordinateGrid::raster(3, 5);
  REQUIRE(g.size() == 15);
  // pixel (r=2, c=4) is the last one and maps to (1, 1)
  CHECK(g.xy[2 * 14] == 1.0);
  CHECK(g.xy[2 * 14 + 1] == 1.0);
  // pixel (1, 2) -> (0.5, 0.5)
  CHECK(g.xy[2 * 7] == 0.5);
  CHECK(g.xy[2 * 7 + 1] == 0.5);
  const auto one = CoordinateGrid::raster(1, 1);
  CHECK(one.xy == std::vector<double>{0.0, 0.0});
  const auto row = CoordinateGrid::raster(1, 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(row.xy[2 * i + 1] == 0.0);
  CHECK_THROWS_AS(CoordinateGrid::raster(0, 3), InvalidInput);
}

TEST_CASE("forward: zero model and single-neuron hand evaluation") {
  auto m = init(Architecture::from_layers(3, 6), 1);
  for (auto& L : m.layers) {
    std::fill(L.w.begin(), L.w.end(), 0.0f);
    std::fill(L.b.begin(), L.b.end(), 0.0f);
  }
  for (float v : forward(m, CoordinateGrid::raster(4, 4))) CHECK(v == 0.0f);

  InrModelD n = init_model<double>(Architecture{{2, 1, 3}, 30.0}, 0);
  n.layers[0].w = {1.0, 0.0};
  n.layers[0].b = {0.0};
  n.layers[1].w = {1.0, 2.0, -1.0};
  n.layers[1].b = {0.0, 0.5, 0.0};
  CoordinateGrid g{1, 1, {0.5, 0.0}};
  const auto y = forward<double>(n, g);
  const double h = std::sin(15.0);
  CHECK(y[0] == doctest::Approx(h).epsilon(1e-15));
  CHECK(y[1] == doctest::Approx(2.0 * h + 0.5).epsilon(1e-15));
  CHECK(y[2] == doctest::Approx(-h).epsilon(1e-15));
}

TEST_CASE("forward: last layer is linear") {
  auto m = test::random_model<double>(Architecture::from_layers(3, 7), 5);
  const auto g = CoordinateGrid::raster(5, 6);
  const auto y = forward<double>(m, g);
  for (auto& w : m.layers.back().w) w *= 2.0;
  for (auto& b : m.layers.back().b) b *= 2.0;
  const auto y2 = forward<double>(m, g);
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(y2[i] == 2.0 * y[i]);
}

TEST_CASE("forward_range matches forward for any partition") {
  const auto m = test::random_model(Architecture::from_layers(4, 9), 3);
  const auto g = CoordinateGrid::raster(7, 9);
  const auto full = forward(m, g);
  std::vector<float> parts(full.size());
  const std::size_t cuts[] = {0, 1, 10, 33, 63};
  for (int i = 0; i + 1 < 5; ++i)
    forward_range<float>(m, g, cuts[i], cuts[i + 1], std::span<float>(parts).subspan(3 * cuts[i]));
  CHECK(parts == full);
  std::vector<float> small(3);
  CHECK_THROWS_AS(forward_range<float>(m, g, 0, 2, small), InvalidInput);
  CHECK_THROWS_AS(forward_range<float>(m, g, 60, 70, small), InvalidInput);
}

TEST_CASE("loss_and_grad: matches central finite differences") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 10; ++trial) {
    const auto arch = test::random_arch(rng, 2, 6);
    auto m = test::random_model<double>(arch, 100 + trial);
    const auto g = CoordinateGrid::raster(3, 4);
    std::vector<double> t(3 * g.size());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : t) v = u(rng);
    const auto lg = loss_and_grad<double>(m, g, t);
    CHECK(lg.loss == doctest::Approx(mse_of(m, g, t)).epsilon(1e-12));

    const double h = 1e-5;
    double diff2 = 0.0, ref2 = 0.0;
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
      auto probe = [&](double& p, double analytic) {
        const double keep = p;
        p = keep + h;
        const double up = mse_of(m, g, t);
        p = keep - h;
        const double dn = mse_of(m, g, t);
        p = keep;
        const double fd = (up - dn) / (2 * h);
        diff2 += (fd - analytic) * (fd - analytic);
        ref2 += fd * fd;
      };
      for (std::size_t i = 0; i < m.layers[l].w.size(); ++i) probe(m.layers[l].w[i], lg.grads[l].w[i]);
      for (std::size_t i = 0; i < m.layers[l].b.size(); ++i) probe(m.layers[l].b[i], lg.grads[l].b[i]);
    }
    CHECK(std::sqrt(diff2 / ref2) <= 1e-4);
  }
}

TEST_CASE("loss_and_grad: sum reduction is 3n times mean") {
  const auto m = test::random_model<double>(Architecture::from_layers(3, 5), 9);
  const auto g = CoordinateGrid::raster(4, 4);
  std::vector<double> t(3 * g.size(), 0.25);
  const auto mean = loss_and_grad<double>(m, g, t, LossReduction::mean);
  const auto sum = loss_and_grad<double>(m, g, t, LossReduction::sum);
  CHECK(sum.loss == doctest::Approx(mean.loss * 48.0).epsilon(1e-12));
  CHECK(sum.grads[1].w[3] == doctest::Approx(mean.grads[1].w[3] * 48.0).epsilon(1e-10));
}

TEST_CASE("loss_and_grad: perfect fit has zero loss and gradient") {
  const auto m = test::random_model<double>(Architecture::from_layers(3, 5), 11);
  const auto g = CoordinateGrid::raster(4, 3);
  const auto y = forward<double>(m, g);
  const auto lg = loss_and_grad<double>(m, g, y);
  CHECK(lg.loss == 0.0);
  for (const auto& L : lg.grads) {
    for (double v : L.w) CHECK(v == 0.0);
    for (double v : L.b) CHECK(v == 0.0);
  }
}

TEST_CASE("loss_and_grad: errors") {
  auto m = test::random_model(Architecture::from_layers(3, 5), 11);
  const auto g = CoordinateGrid::raster(2, 2);
  std::vector<float> t(12, 0.5f);
  std::vector<float> short_t(11, 0.5f);
  CHECK_THROWS_AS(loss_and_grad<float>(m, g, short_t), InvalidInput);
  t[4] = std::nanf("");
  CHECK_THROWS_AS(loss_and_grad<float>(m, g, t), NumericError);
  t[4] = 0.5f;
  m.layers[1].w[0] = std::numeric_limits<float>::infinity();
  CHECK_THROWS_AS(loss_and_grad<float>(m, g, t), NumericError);
}

TEST_CASE("masked entries get zero gradient and stay zero under Adam") {
  auto m = test::random_model(Architecture::from_layers(3, 8), 21);
  std::mt19937_64 rng(5);
  for (auto& mk : m.mask)
    for (auto& v : mk) v = (rng() % 3 == 0) ? 0 : 1;
  m.apply_mask();
  const auto img = test::noise_image(6, 6, 4);
  const auto g = CoordinateGrid::raster(6, 6);
  AdamState<float> st(m);
  for (int s = 0; s < 50; ++s) {
    const auto lg = loss_and_grad<float>(m, g, img.pixels);
    for (std::size_t l = 0; l < m.layers.size(); ++l)
      for (std::size_t i = 0; i < m.mask[l].size(); ++i)
        if (!m.mask[l][i]) REQUIRE(lg.grads[l].w[i] == 0.0f);
    adam_step<float>(m, st, lg.grads, 1e-3);
    for (std::size_t l = 0; l < m.layers.size(); ++l)
      for (std::size_t i = 0; i < m.mask[l].size(); ++i)
        if (!m.mask[l][i]) REQUIRE(m.layers[l].w[i] == 0.0f);
  }
}

TEST_CASE("adam: zero gradient is a no-op, first step is -lr*sign(g)") {
  auto m = test::random_model<double>(Architecture::from_layers(2, 3), 3);
  const auto before = m;
  AdamState<double> st(m);
  auto zero = loss_and_grad<double>(m, CoordinateGrid::raster(2, 2), std::vector<double>(12, 0.0)).grads;
  for (auto& L : zero) {
    std::fill(L.w.begin(), L.w.end(), 0.0);
    std::fill(L.b.begin(), L.b.end(), 0.0);
  }
  adam_step<double>(m, st, zero, 1e-2);
  CHECK(m == before);

  AdamState<double> st2(m);
  auto grads = zero;
  grads[0].w[0] = 3.0;
  grads[0].w[1] = -0.002;
  grads[1].b[2] = 1e-3;
  const double lr = 1e-3;
  adam_step<double>(m, st2, grads, lr);
  // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
  CHECK(m.layers[0].w[0] - before.layers[0].w[0] == doctest::Approx(-lr * 3.0 / (3.0 + 1e-8)).epsilon(1e-9));
  CHECK(m.layers[0].w[1] - before.layers[0].w[1] ==
        doctest::Approx(lr * 0.002 / (0.002 + 1e-8)).epsilon(1e-9));
  CHECK(m.layers[1].b[2] - before.layers[1].b[2] == doctest::Approx(-lr * 1e-3 / (1e-3 + 1e-8)).epsilon(1e-9));
}

TEST_CASE("adam converges on a one-parameter quadratic") {
  // Output 0 of a [2,3] net is w00*x + w01*y + b0; with a single (0,0) pixel
  // the loss is (b0 - target)^2 / 3 for channel 0.
  InrModelD m = init_model<double>(Architecture{{2, 3}}, 0);
  const CoordinateGrid g{1, 1, {0.0, 0.0}};
  const std::vector<double> t{0.7, 0.0, 0.0};
  AdamState<double> st(m);
  const double first = loss_and_grad<double>(m, g, t).loss;
  double prev = first;
  for (int s = 0; s < 100; ++s) {
    const auto lg = loss_and_grad<double>(m, g, t);
    if (s >= 5) CHECK(lg.loss <= prev);
    prev = lg.loss;
    adam_step<double>(m, st, lg.grads, 5e-3);
  }
  CHECK(prev < first / 5);
  CHECK(m.layers[0].b[0] > 0.35);
  CHECK(m.layers[0].b[0] < 0.7);
}

TEST_CASE("model validation and helpers") {
  auto m = init(Architecture::from_layers(3, 4), 0);
  CHECK_NOTHROW(m.validate());
  CHECK(m.pruned_count() == 0);
  m.mask[1][0] = 0;
  m.mask[2][3] = 0;
  m.apply_mask();
  CHECK(m.layers[1].w[0] == 0.0f);
  CHECK(m.pruned_count() == 2);
  CHECK(m.prune_ratio() == doctest::Approx(2.0 / 36.0));
  auto bad = m;
  bad.layers[1].w.pop_back();
  CHECK_THROWS_AS(bad.validate(), FormatError);
  bad = m;
  bad.mask.pop_back();
  CHECK_THROWS_AS(bad.validate(), FormatError);

  const auto d = model_cast<double>(m);
  const auto back = model_cast<float>(d);
  CHECK(back == m);
}
