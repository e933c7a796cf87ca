#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dmada/mixup.hpp"
#include "helpers.hpp"

using namespace dmada;
using dmada::testing::random_tensor;

TEST_CASE("lambda endpoints return the respective inputs exactly") {
  Rng rng(3);
  Tensor s = random_tensor({4, 6}, rng);
  Tensor t = random_tensor({4, 6}, rng);
  CHECK(mixup::pixel_mixup(s, t, 1.0).first.values() == s.values());
  CHECK(mixup::pixel_mixup(s, t, 0.0).first.values() == t.values());
  auto [mu, sigma] = mixup::feature_mixup(s, t, t, s, 1.0);
  CHECK(mu.values() == s.values());
  CHECK(sigma.values() == t.values());
}

TEST_CASE("mixup properties over many random cases") {
  Rng rng(17);
  const std::size_t cases = 10000;
  for (std::size_t c = 0; c < cases; ++c) {
    const double lam = rng.uniform();
    const double a = rng.normal(), b = rng.normal();
    Tensor s = Tensor::from({1, 2}, {a, std::min(a, b)});
    Tensor t = Tensor::from({1, 2}, {b, std::max(a, b)});

    auto [m, l_dom] = mixup::pixel_mixup(s, t, lam);
    CHECK(l_dom == lam);

    // symmetry: mix(s,t,lam) == mix(t,s,1-lam)
    auto sym = mixup::pixel_mixup(t, s, 1.0 - lam).first;
    for (std::size_t i = 0; i < 2; ++i)
      CHECK(m.at(i) == doctest::Approx(sym.at(i)).epsilon(1e-12));

    // convexity: the mix lies within the componentwise envelope
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(m.at(i) >= std::min(s.at(i), t.at(i)) - 1e-12);
      CHECK(m.at(i) <= std::max(s.at(i), t.at(i)) + 1e-12);
    }

    // label block normalization for a random class
    const int y = static_cast<int>(rng.index(7));
    auto blk = mixup::build_class_block(mixup::BlockKind::mixup, 7, y, lam);
    double total = blk.l_comp;
    for (double v : blk.l_cls) total += v;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(blk.l_cls[y] == lam);
  }
}

TEST_CASE("class label blocks per kind") {
  auto src = mixup::build_class_block(mixup::BlockKind::source, 4, 2);
  CHECK(src.l_cls == std::vector<double>{0, 0, 1, 0});
  CHECK(src.l_comp == 0.0);

  auto tgt = mixup::build_class_block(mixup::BlockKind::target, 4);
  CHECK(tgt.l_cls == std::vector<double>(4, 0.0));
  CHECK(tgt.l_comp == 1.0);

  auto mix = mixup::build_class_block(mixup::BlockKind::mixup, 4, 1, 0.3);
  CHECK(mix.l_cls == std::vector<double>{0, 0.3, 0, 0});
  CHECK(mix.l_comp == doctest::Approx(0.7));

  CHECK_THROWS_AS(mixup::build_class_block(mixup::BlockKind::source, 4),
                  ValueError);
  CHECK_THROWS_AS(mixup::build_class_block(mixup::BlockKind::source, 4, 5),
                  ValueError);
  CHECK_THROWS_AS(mixup::build_class_block(mixup::BlockKind::mixup, 4, 1),
                  ValueError);
}

TEST_CASE("triplet roles flip at one half with margin |2l-1|") {
  auto hi = mixup::triplet_roles(0.8);
  CHECK(hi.anchor == mixup::Role::mixed);
  CHECK(hi.positive == mixup::Role::source);
  CHECK(hi.negative == mixup::Role::target);
  CHECK(hi.margin == doctest::Approx(0.6).epsilon(1e-12));

  auto lo = mixup::triplet_roles(0.2);
  CHECK(lo.positive == mixup::Role::target);
  CHECK(lo.negative == mixup::Role::source);
  CHECK(lo.margin == doctest::Approx(0.6).epsilon(1e-12));

  // boundary goes to the source side
  CHECK(mixup::triplet_roles(0.5).positive == mixup::Role::source);
  CHECK(mixup::triplet_roles(0.5).margin == doctest::Approx(0.0));
}

TEST_CASE("per-row mixing matches scalar mixing row by row") {
  Rng rng(8);
  Tensor s = random_tensor({3, 5}, rng);
  Tensor t = random_tensor({3, 5}, rng);
  std::vector<double> lams{0.1, 0.5, 0.9};
  Tensor rows = mixup::pixel_mixup_rows(s, t, lams);
  for (std::size_t i = 0; i < 3; ++i) {
    Tensor one = mixup::pixel_mixup(s, t, lams[i]).first;
    for (std::size_t j = 0; j < 5; ++j)
      CHECK(rows.at(i, j) == doctest::Approx(one.at(i, j)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(mixup::pixel_mixup_rows(s, t, {0.5}), ShapeError);
  CHECK_THROWS_AS(mixup::pixel_mixup_rows(s, t, {0.1, 0.5, 1.5}), ValueError);
}

TEST_CASE("lambda sampler stays in range and rejects bad alpha") {
  Rng rng(123);
  for (int i = 0; i < 1000; ++i) {
    double l = mixup::sample_lambda(2.0, rng);
    CHECK(l >= 0.0);
    CHECK(l <= 1.0);
  }
  CHECK_THROWS_AS(mixup::sample_lambda(0.0, rng), ValueError);
  CHECK_THROWS_AS(mixup::sample_lambda(-1.0, rng), ValueError);
}

TEST_CASE("beta(2,2) draws match the distribution moments") {
  Rng rng(20240817);
  const int n = 100000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double l = mixup::sample_lambda(2.0, rng);
    sum += l;
    sum2 += l * l;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(mean == doctest::Approx(0.5).epsilon(0.01));    // +- 0.005
  CHECK(var == doctest::Approx(0.05).epsilon(0.1));     // +- 0.005
  CHECK(std::abs(mean - 0.5) < 0.005);
  CHECK(std::abs(var - 0.05) < 0.005);
}

TEST_CASE("mix counters track invocations") {
  auto& c = mixup::counters();
  const long p0 = c.pixel_mixup_calls.load();
  const long f0 = c.feature_mixup_calls.load();
  Rng rng(4);
  Tensor s = random_tensor({2, 2}, rng);
  Tensor t = random_tensor({2, 2}, rng);
  mixup::pixel_mixup(s, t, 0.5);
  mixup::feature_mixup(s, s, t, t, 0.5);
  CHECK(c.pixel_mixup_calls.load() == p0 + 1);
  CHECK(c.feature_mixup_calls.load() == f0 + 1);
}

TEST_CASE("shape and lambda validation") {
  Rng rng(6);
  Tensor s = random_tensor({2, 3}, rng);
  Tensor t = random_tensor({3, 2}, rng);
  CHECK_THROWS_AS(mixup::pixel_mixup(s, t, 0.5), ShapeError);
  Tensor t2 = random_tensor({2, 3}, rng);
  CHECK_THROWS_AS(mixup::pixel_mixup(s, t2, 1.5), ValueError);
  CHECK_THROWS_AS(mixup::pixel_mixup(s, t2, -0.1), ValueError);
}
