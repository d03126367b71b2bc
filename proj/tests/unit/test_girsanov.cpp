#include "doctest.h"

#include <cmath>

#include "../oracles.hpp"
#include "memsde/girsanov.hpp"

using namespace memsde;

namespace {

// y(s) = -0.1 + 0.1 e^{0.5 |s|}: y(0) = 0 and |y(s)| <= 0.1 e^{0.5 |s|}
PastHistory growing_past(double dt) {
  return PastHistory::analytic(dt, 0, {{{-0.1}, 0.0}, {{0.1}, 0.5}});
}

}  // namespace

TEST_SUITE("girsanov") {

TEST_CASE("discrepancy constant") {
  CHECK(DiscrepancyBound{1.0, 0.1, 1.0, 0.5}.L() == doctest::Approx(0.2));
  CHECK(DiscrepancyBound{2.0, 3.0, 2.0, 0.5}.L() == doctest::Approx(4.0));
  CHECK_THROWS(DiscrepancyBound{1.0, 1.0, 1.0, 1.0}.L());
  CHECK_THROWS(DiscrepancyBound{1.0, 1.0, 1.0, 2.0}.L());
}

TEST_CASE("envelope agrees with the integral it bounds") {
  // K K' int_{-inf}^{-t} e^{lambda s} e^{lambda' |s + t|} ds
  const DiscrepancyBound b{0.7, 0.3, 1.5, 0.4};
  DiscrepancyProfile p;
  p.bound = b;
  p.L = b.L();
  p.times = {0.0, 0.5, 2.0, 7.0};
  for (std::size_t k = 0; k < p.times.size(); ++k) {
    const double t = p.times[k];
    const double integral = oracle::quadrature(
        [&](double u) { return std::exp(b.rate * (-t - u)) * std::exp(b.rate_prime * u); }, 0.0, 60.0, 20000);
    CHECK(p.bound_at(k) == doctest::Approx(b.K * b.K_prime * integral).epsilon(1e-9));
  }
}

TEST_CASE("identical pasts give no discrepancy") {
  const auto spec = DriftSpec::modulated_damping(1, 0.5, 1);
  const auto past = growing_past(0.01);
  const auto traj = simulate(spec, past, 2.0, 0.01, 1);
  const auto p = drift_discrepancy(traj, past, past, spec, {1.0, 0.1, 1.0, 0.5});
  for (double m : p.magnitude) CHECK(m == 0.0);
  const auto r = rn_density(traj, p, novikov(p, 2.0));
  CHECK(*r.log_rn_density == 0.0);
  CHECK(*r.rn_density == 1.0);
  CHECK(r.novikov_truncated == 0.0);
}

TEST_CASE("OU ignores the past") {
  const auto spec = DriftSpec::ou(1.0);
  const auto x = PastHistory::zero(0.01, 0, 1);
  const auto traj = simulate(spec, x, 2.0, 0.01, 1);
  const auto p = drift_discrepancy(traj, x, growing_past(0.01), spec, {0.0, 0.1, 1.0, 0.5});
  for (double m : p.magnitude) CHECK(m == 0.0);
}

TEST_CASE("modulated damping discrepancy stays under the envelope") {
  const auto spec = DriftSpec::modulated_damping(1, 0.5, 1);
  const auto x = PastHistory::zero(0.01, 0, 1);
  const auto y = growing_past(0.01);
  const auto traj = simulate(spec, x, 5.0, 0.01, 4);
  double R = 0.0;
  for (double v : traj.x) R = std::max(R, std::abs(v));
  const double K = declared_conditions(spec).lipschitz_K(R);
  const auto p = drift_discrepancy(traj, x, y, spec, {K, 0.1, 1.0, 0.5});
  CHECK(p.L == doctest::Approx(0.2 * K));
  bool some = false;
  for (std::size_t k = 0; k < p.times.size(); ++k) {
    CHECK(p.magnitude[k] <= p.bound_at(k) * (1.0 + 1e-9));
    some = some || p.magnitude[k] > 0.0;
  }
  CHECK(some);

  // brute force: each node from scratch, the future appended to each past
  std::vector<Vector> xs = x.window();
  std::vector<Vector> ys = y.window();
  for (std::size_t k = 0; k <= traj.steps; k += 50) {
    while (xs.size() < x.window_size() + k) {
      xs.push_back({traj.x_at(xs.size() - x.window_size() + 1)[0]});
      ys.push_back(xs.back());
    }
    const auto hx = PastHistory::with_tail(0.01, xs, oracle::advanced_tail(x.tail_terms(), 0.01 * k));
    const auto hy = PastHistory::with_tail(0.01, ys, oracle::advanced_tail(y.tail_terms(), 0.01 * k));
    const double want = oracle::drift(spec, hy)[0] - oracle::drift(spec, hx)[0];
    CHECK(p.delta_at(k)[0] == doctest::Approx(want).epsilon(1e-7));
  }
}

TEST_CASE("profile argument checks") {
  const auto spec = DriftSpec::modulated_damping(1, 0.5, 1);
  const auto x = PastHistory::zero(0.01, 0, 1);
  const auto traj = simulate(spec, x, 1.0, 0.01, 1);
  const DiscrepancyBound b{1.0, 1.0, 1.0, 0.5};
  CHECK_THROWS(drift_discrepancy(traj, x, PastHistory::sampled(0.01, {{1.0}}), spec, b));
  CHECK_THROWS(drift_discrepancy(traj, x, PastHistory::zero(0.02, 0, 1), spec, b));
  CHECK_THROWS(drift_discrepancy(traj, PastHistory::sampled(0.01, {{1.0}}), PastHistory::sampled(0.01, {{1.0}}),
                                 spec, b));
}

TEST_CASE("Novikov integral") {
  DiscrepancyProfile p;
  p.dt = 0.1;
  p.dimension = 1;
  p.bound = {2.0, 1.0, 1.0, 0.0};
  p.L = p.bound.L();
  for (int k = 0; k <= 10; ++k) {
    p.times.push_back(0.1 * k);
    p.magnitude.push_back(0.0);
    p.delta.push_back(0.0);
  }
  auto r = novikov(p, 1.0);
  CHECK(r.novikov_truncated == 0.0);
  CHECK(r.novikov_bound == doctest::Approx(1.0));
  CHECK(r.novikov_tail_bound == doctest::Approx(std::exp(-2.0)));
  CHECK(r.novikov_finite);

  // |delta| = 1 on [0, 1] gives 1/2
  for (auto& m : p.magnitude) m = 1.0;
  r = novikov(p, 1.0);
  CHECK(r.novikov_truncated == doctest::Approx(0.5));
  CHECK(r.novikov_integral == doctest::Approx(0.5 + std::exp(-2.0)));
  // horizon inside the profile truncates it
  CHECK(novikov(p, 0.5).novikov_truncated == doctest::Approx(0.25));
}

TEST_CASE("log density by hand") {
  const std::vector<double> delta = {1.0, 2.0, 5.0};
  const std::vector<double> dw = {0.1, -0.1};
  CHECK(log_rn_density(delta, dw, 1, 0.5) == doctest::Approx(0.1 - 0.2 - 0.25 * 5.0));
  CHECK_THROWS(log_rn_density(std::vector<double>{1.0}, dw, 1, 0.5));
}

TEST_CASE("density ensemble") {
  const auto spec = DriftSpec::modulated_damping(1, 0.5, 1);
  const auto x = PastHistory::zero(0.01, 0, 1);
  const auto same = rn_density_ensemble(spec, x, x, 1.0, 0.01, 1, 10);
  CHECK(same.mean == 1.0);
  CHECK(same.standard_error == 0.0);
  const auto a = rn_density_ensemble(spec, x, growing_past(0.01), 2.0, 0.01, 1, 300, 1);
  const auto b = rn_density_ensemble(spec, x, growing_past(0.01), 2.0, 0.01, 1, 300, 3);
  CHECK(a.mean == b.mean);
  CHECK(a.standard_error == b.standard_error);
  CHECK(a.all_finite);
  CHECK(std::abs(a.mean - 1.0) <= 4.0 * a.standard_error + 1e-12);
  CHECK_THROWS(rn_density_ensemble(spec, x, x, 1.0, 0.01, 1, 1));
}

TEST_CASE("window functional") {
  // X(t) = t under zero drift with dW = dt
  const std::vector<double> inc(300, 0.01);
  const auto traj = simulate_with_increments(DriftSpec::zero(), PastHistory::zero(0.01, 0, 1), 0.01, inc);
  WindowFunctional F{1.0, 10.0, 0};
  const auto v = window_functional_values(traj, F);
  REQUIRE(v.size() == 201);
  for (std::size_t k = 0; k < v.size(); k += 20) {
    CHECK(v[k] == doctest::Approx(0.01 * static_cast<double>(k) + 0.5).epsilon(1e-12));
  }
  F.bound = 1.0;
  const auto clamped = window_functional_values(traj, F);
  CHECK(clamped.back() == 1.0);
  CHECK(clamped.front() == doctest::Approx(0.5));
  CHECK(ergodic_average(traj, {1.0, 10.0, 0}) == doctest::Approx(1.5).epsilon(1e-12));
  CHECK_THROWS(window_functional_values(traj, {5.0, 10.0, 0}));
  CHECK_THROWS(window_functional_values(traj, {1.0, 10.0, 1}));
}

TEST_CASE("coupling") {
  const auto spec = DriftSpec::modulated_damping(1, 0.3, 1);
  const auto p1 = PastHistory::analytic(0.01, 0, {{{1.0}, 0.0}});
  const auto p2 = PastHistory::analytic(0.01, 0, {{{-1.0}, 0.0}});
  SUBCASE("same past, no gap") {
    const auto r = couple(spec, p1, p1, 20.0, 0.01, 3);
    CHECK(r.final_gap == 0.0);
    for (double d : r.discrepancy) CHECK(d == 0.0);
  }
  SUBCASE("symmetric in the pasts") {
    const auto a = couple(spec, p1, p2, 20.0, 0.01, 3);
    const auto b = couple(spec, p2, p1, 20.0, 0.01, 3);
    CHECK(a.discrepancy == b.discrepancy);
    CHECK(a.final_gap == b.final_gap);
    CHECK(a.discrepancy.front() == 2.0);
    CHECK(a.discrepancy.back() < 1e-6);
  }
  SUBCASE("OU contracts like (1 - b dt)^k") {
    const auto r = couple(DriftSpec::ou(0.5), p1, p2, 5.0, 0.01, 3);
    for (std::size_t k = 0; k < r.discrepancy.size(); k += 25) {
      const double want = 2.0 * std::pow(1.0 - 0.5 * 0.01, static_cast<double>(k));
      CHECK(std::abs(r.discrepancy[k] - want) <= 1e-12 * want);
    }
  }
  SUBCASE("calibration uses replicates independent of the coupled pair") {
    const WindowFunctional F;
    const double sd = calibrate_average_sd(spec, p1, 20.0, 0.01, 3, 8, F);
    CHECK(sd > 0.0);
    CHECK(sd == calibrate_average_sd(spec, p1, 20.0, 0.01, 3, 8, F, 3));
    CHECK_THROWS(calibrate_average_sd(spec, p1, 20.0, 0.01, 3, 1, F));
  }
}

}
