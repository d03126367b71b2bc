#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "memsde/rng.hpp"
#include "memsde/stationary.hpp"

using namespace memsde;

namespace {

EmpiricalMeasure cloud(std::vector<double> v, std::size_t d = 1) {
  EmpiricalMeasure m;
  m.dimension = d;
  m.state_dimension = d;
  m.samples = std::move(v);
  return m;
}

// equal-size samples: W1 is the mean gap between order statistics
double sorted_gap(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

std::vector<double> normals(std::uint64_t seed, std::uint64_t stream, std::size_t n, double shift = 0.0) {
  CounterRng rng(seed, stream);
  std::vector<double> v(n);
  for (auto& x : v) x = shift + rng.normal();
  return v;
}

}  // namespace

TEST_SUITE("stationary") {

TEST_CASE("uniform-time sampling of Brownian motion has E W(U)^2 = T/2") {
  const std::size_t n = 20000;
  const double T = 4.0;
  const auto m = kb_average(DriftSpec::zero(), n, T, 0.01, 3);
  // Var W(U)^2 = 3 E U^2 - (T/2)^2 = T^2 - T^2/4
  const double se = std::sqrt(0.75 * T * T / static_cast<double>(n));
  CHECK(std::abs(m.second_moment() - T / 2) <= 4.0 * se);
  CHECK(m.provenance.rule == "uniform_time");
  CHECK(m.size() == n);
}

TEST_CASE("terminal sampling of OU follows the discrete variance") {
  const double dt = 0.01;
  const double r = (1.0 - dt) * (1.0 - dt);
  const double want = dt * (1.0 - std::pow(r, 500)) / (1.0 - r);
  KbOptions opt;
  opt.mode = SamplingMode::terminal;
  const auto m = kb_average(DriftSpec::ou(1.0), 8000, 5.0, dt, 4, opt);
  CHECK(std::abs(m.second_moment() - want) <= 4.0 * want * std::sqrt(2.0 / 8000.0));
}

TEST_CASE("state_and_memory adds the memory features") {
  KbOptions opt;
  opt.observable = Observable::state_and_memory;
  const auto m = kb_average(DriftSpec::linear_delay(1, 0.3, 1, 2), 50, 1.0, 0.01, 1, opt);
  CHECK(m.dimension == 4);
  CHECK(m.state_dimension == 2);
  const auto plain = kb_average(DriftSpec::linear_delay(1, 0.3, 1, 2), 50, 1.0, 0.01, 1);
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(m.sample(i)[0] == plain.sample(i)[0]);
    CHECK(m.sample(i)[1] == plain.sample(i)[1]);
  }
}

TEST_CASE("kb_average is independent of the thread count") {
  const auto spec = DriftSpec::modulated_damping(1, 0.5, 1);
  KbOptions one;
  KbOptions three;
  three.threads = 3;
  const auto a = kb_average(spec, 200, 5.0, 0.01, 2, one);
  const auto b = kb_average(spec, 200, 5.0, 0.01, 2, three);
  CHECK(a.samples == b.samples);
  CHECK_THROWS(kb_average(spec, 0, 5.0, 0.01, 2));
}

TEST_CASE("W1 between empirical measures") {
  CHECK(w1_distance_1d({0.0}, {1.0}) == doctest::Approx(1.0));
  CHECK(w1_distance_1d({0.0, 1.0}, {1.0, 0.0}) == 0.0);
  CHECK(w1_distance_1d({0.0, 0.0, 1.0, 1.0}, {0.0, 1.0}) == 0.0);
  CHECK(w1_distance_1d({0.0, 2.0}, {1.0, 1.0}) == doctest::Approx(1.0));
  CHECK(w1_distance_1d({0.0}, {0.0, 3.0}) == doctest::Approx(1.5));
  CHECK_THROWS(w1_distance_1d({}, {1.0}));

  const auto a = normals(1, 1, 500);
  const auto b = normals(1, 2, 500, 0.3);
  const auto c = normals(1, 3, 700, -0.2);
  CHECK(w1_distance_1d(a, b) == doctest::Approx(sorted_gap(a, b)).epsilon(1e-12));
  CHECK(w1_distance_1d(a, b) == doctest::Approx(w1_distance_1d(b, a)).epsilon(1e-14));
  CHECK(w1_distance_1d(a, c) <= w1_distance_1d(a, b) + w1_distance_1d(b, c) + 1e-12);
  auto shifted = a;
  for (auto& x : shifted) x += 0.7;
  CHECK(w1_distance_1d(a, shifted) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("sliced W1 in several dimensions") {
  std::vector<double> p = normals(2, 1, 800);
  std::vector<double> q = normals(2, 2, 800);
  const auto a = cloud(p, 2);
  const auto b = cloud(q, 2);
  CHECK(w1_distance(a, a, 32, 5) == 0.0);
  CHECK(w1_distance(a, b, 32, 5) == w1_distance(b, a, 32, 5));
  CHECK(w1_distance(a, b, 32, 5) == w1_distance(a, b, 32, 5));
  // a translation by v gives |v| E|cos theta| = 2|v|/pi on average
  auto moved = p;
  for (std::size_t i = 0; i < moved.size(); i += 2) moved[i] += 1.0;
  CHECK(w1_distance(a, cloud(moved, 2), 4000, 1) == doctest::Approx(2.0 / M_PI).epsilon(0.02));
  CHECK_THROWS(w1_distance(a, cloud({0.0}), 8, 0));
}

TEST_CASE("mean, second moment and covariance") {
  const auto m = cloud({1.0, 2.0, 3.0, 6.0}, 2);
  CHECK(m.mean() == Vector{2.0, 4.0});
  CHECK(m.second_moment() == doctest::Approx((1.0 + 4.0 + 9.0 + 36.0) / 2.0));
  CHECK(m.covariance() == std::vector<double>{1.0, 2.0, 2.0, 4.0});
}

TEST_CASE("moment bound") {
  CHECK(moment_bound(0.0, 1.0) == 0.5);
  CHECK(moment_bound(1.0, 2.0, 3) == doctest::Approx(1.25));
  CHECK_THROWS(moment_bound(0.0, 0.0));
  // the bound is the fixed point of y' = (2 C1 + d) - 2 C2 y; RK4 from y = 0
  for (auto [C1, C2, d] : {std::tuple{0.0, 0.5, 1}, std::tuple{0.3, 1.7, 2}, std::tuple{2.0, 0.25, 3}}) {
    auto f = [&](double y) { return (2 * C1 + d) - 2 * C2 * y; };
    double y = 0.0;
    const double h = 0.01;
    for (int i = 0; i < 20000; ++i) {
      const double k1 = f(y), k2 = f(y + h * k1 / 2), k3 = f(y + h * k2 / 2), k4 = f(y + h * k3);
      y += h * (k1 + 2 * k2 + 2 * k3 + k4) / 6;
    }
    CHECK(moment_bound(C1, C2, static_cast<std::size_t>(d)) == doctest::Approx(y).epsilon(1e-9));
  }
}

TEST_CASE("moment check arithmetic") {
  const auto m = cloud(normals(3, 1, 2000));
  const auto r = moment_bound_check(m, 0.0, 1.0, 3.0, 200, 1);
  CHECK(r.theoretical == 0.5);
  CHECK(r.empirical == doctest::Approx(m.second_moment()));
  CHECK(r.tolerance == doctest::Approx(3.0 * bootstrap_second_moment_se(m, 200, 1)));
  CHECK(r.pass == (r.empirical <= r.theoretical + r.tolerance));
  CHECK_FALSE(r.pass);  // unit variance against a bound of 1/2
  // SE of the mean of squares of N(0,1) is sqrt(2/n)
  CHECK(bootstrap_second_moment_se(m, 400, 2) == doctest::Approx(std::sqrt(2.0 / 2000.0)).epsilon(0.15));
  CHECK_THROWS(bootstrap_second_moment_se(m, 1, 0));
}

TEST_CASE("OU measure stays within the moment bound") {
  const auto m = kb_average(DriftSpec::ou(1.0), 4000, 20.0, 0.01, 6);
  const auto r = moment_bound_check(m, 0.0, 1.0);
  CHECK(r.pass);
  CHECK(r.empirical > 0.3);
}

TEST_CASE("increment tail bound") {
  CHECK(increment_tail_bound(1.0, 0.1, 1.0, 0.5) == doctest::Approx(0.50));
  CHECK(increment_tail_bound(2.0, 0.1, 0.0, 0.0) == doctest::Approx(48.0 * 0.01 / 16.0));
  CHECK(increment_tail_bound(1.0, 0.1, 0.0, 0.0, 2) == doctest::Approx(128.0 * 0.01));
}

TEST_CASE("Brownian increment tails match the Gaussian law") {
  const std::size_t n = 20000;
  const auto snaps = snapshot_ensemble(DriftSpec::zero(), PastHistory::zero(0.01, 0, 1), {1.0, 1.1},
                                       0.01, 8, n);
  for (double z : {0.3, 0.5}) {
    const auto r = increment_tail_check(snaps, z, 1.0, 1.1, 0.0, 0.0);
    const double p = std::erfc(z / std::sqrt(2.0 * 0.1));
    CHECK(std::abs(r.empirical - p) <= 4.0 * std::sqrt(p * (1 - p) / n));
    CHECK(r.empirical <= r.theoretical + r.tolerance);
    CHECK(r.pass);
  }
  CHECK_THROWS(increment_tail_check(snaps, 0.5, 1.0, 1.2, 0.0, 0.0));
  CHECK_THROWS(increment_tail_check(snaps, 0.0, 1.0, 1.1, 0.0, 0.0));
}

TEST_CASE("tail check from trajectories agrees with snapshots") {
  const auto spec = DriftSpec::ou(1.0);
  const auto past = PastHistory::zero(0.01, 0, 1);
  std::vector<Trajectory> trajs;
  for (std::size_t i = 0; i < 300; ++i) trajs.push_back(simulate(spec, past, 2.0, 0.01, 4, std::nullopt, i));
  const auto snaps = snapshot_ensemble(spec, past, {1.0, 1.5}, 0.01, 4, 300);
  const auto a = increment_tail_check(trajs, 0.2, 1.0, 1.5, 1.0, 0.5);
  const auto b = increment_tail_check(snaps, 0.2, 1.0, 1.5, 1.0, 0.5);
  CHECK(a.empirical == b.empirical);
  CHECK(a.theoretical == b.theoretical);
  const auto c = snapshot_ensemble(spec, past, {1.0, 1.5}, 0.01, 4, 300, 3);
  CHECK(c.values == snaps.values);
}

TEST_CASE("growth diagnostic") {
  SUBCASE("bounded path passes") {
    std::vector<double> v(2001, 1.0);
    const auto r = growth_diagnostic(v, 1, 0.01);
    CHECK(r.pass);
    CHECK(r.constants.at("windows") == 19);
    CHECK(r.rows.size() == 19);
    CHECK(r.rows[0][1] == 1.0);
  }
  SUBCASE("exponential path fails") {
    std::vector<double> v(2001);
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = std::exp(0.01 * static_cast<double>(k));
    const auto r = growth_diagnostic(v, 1, 0.01);
    CHECK_FALSE(r.pass);
    CHECK(r.empirical > r.theoretical);
    CHECK(r.constants.at("ratio_trend_slope") > 0.0);
    // window n = [n, n+1] attains e^{n+1}
    CHECK(r.rows[4][1] == doctest::Approx(std::exp(6.0)).epsilon(1e-12));
  }
  SUBCASE("allowance is a floor of the fraction") {
    std::vector<double> v(30001, 0.0);
    v[5050] = 1e3;  // one spike inside window 50
    const auto r = growth_diagnostic(v, 1, 0.01);
    CHECK(r.theoretical == 2.0);
    CHECK(r.empirical == 1.0);
    CHECK(r.pass);
  }
  SUBCASE("argument checks") {
    std::vector<double> v(201, 0.0);
    CHECK_THROWS(growth_diagnostic(v, 1, 0.01));
    std::vector<double> w(2001, 0.0);
    GrowthOptions bad;
    bad.delta0 = 0.2;
    CHECK_THROWS(growth_diagnostic(w, 1, 0.01, bad));
  }
}

}
