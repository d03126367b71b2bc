#include "memsde/integrator.hpp"

#include <cmath>
#include <stdexcept>

namespace memsde {

EulerMaruyama::EulerMaruyama(const DriftSpec& spec, PastHistory history)
    : spec_(&spec),
      history_(std::move(history)),
      dt_(history_.grid_step()),
      drift_(spec.dimension),
      next_(spec.dimension) {
  if (history_.dimension() != spec.dimension) {
    throw std::invalid_argument("integrator: history and drift dimensions differ");
  }
  register_kernels(spec, history_);
  evaluate_into(*spec_, history_, drift_);
}

void EulerMaruyama::advance(std::span<const double> dW) {
  const auto x = history_.current();
  const std::size_t d = x.size();
  for (std::size_t c = 0; c < d; ++c) {
    if (!std::isfinite(drift_[c])) {
      throw IntegrationError("integrator: non-finite drift at node " + std::to_string(steps_),
                             steps_, Vector(x.begin(), x.end()));
    }
  }
  double sq = 0.0;
  for (std::size_t c = 0; c < d; ++c) {
    next_[c] = x[c] + drift_[c] * dt_ + dW[c];
    sq += next_[c] * next_[c];
  }
  if (!std::isfinite(sq) || std::sqrt(sq) > kBlowupThreshold) {
    throw IntegrationError("integrator: blow-up at node " + std::to_string(steps_ + 1), steps_,
                           Vector(x.begin(), x.end()));
  }
  history_.push(dt_, next_);
  ++steps_;
  evaluate_into(*spec_, history_, drift_);
}

PastHistory step(PastHistory state, const DriftSpec& spec, std::span<const double> dW, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be positive");
  if (dW.size() != spec.dimension) throw std::invalid_argument("step: dW dimension mismatch");
  if (std::abs(dt - state.grid_step()) > 1e-12 * state.grid_step()) {
    throw std::invalid_argument("step: dt must equal the history grid step");
  }
  EulerMaruyama stepper(spec, std::move(state));
  stepper.advance(dW);
  return stepper.history();
}

std::size_t step_count(double T, double dt) {
  if (!(T > 0.0) || !(dt > 0.0)) throw std::invalid_argument("simulate: T and dt must be positive");
  const double ratio = T / dt;
  const double n = std::round(ratio);
  if (std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio)) {
    throw std::invalid_argument("simulate: T must be an integer multiple of dt");
  }
  return static_cast<std::size_t>(n);
}

namespace {

template <class NextIncrement>
Trajectory run(const DriftSpec& spec, const PastHistory& initial, double dt, std::size_t steps,
               std::optional<double> stopping_radius, NextIncrement&& next_increment) {
  if (std::abs(dt - initial.grid_step()) > 1e-12 * initial.grid_step()) {
    throw std::invalid_argument("simulate: dt must equal the initial history grid step");
  }
  const std::size_t d = spec.dimension;
  Trajectory traj;
  traj.dt = dt;
  traj.steps = steps;
  traj.dimension = d;
  traj.stopping_radius = stopping_radius;
  traj.drift_spec_id = spec.id();
  traj.x.resize((steps + 1) * d);
  traj.w.assign((steps + 1) * d, 0.0);
  traj.dw.resize(steps * d);

  EulerMaruyama stepper(spec, initial);
  auto record_node = [&](std::size_t k) {
    const auto x = stepper.current();
    std::copy(x.begin(), x.end(), traj.x.begin() + static_cast<long>(k * d));
    if (stopping_radius && !traj.tau_r && norm(x) >= *stopping_radius) {
      traj.tau_r = StoppingRecord{k, *stopping_radius};
    }
  };
  record_node(0);
  for (std::size_t k = 0; k < steps; ++k) {
    std::span<double> dw(traj.dw.data() + k * d, d);
    next_increment(k, dw);
    stepper.advance(dw);
    for (std::size_t c = 0; c < d; ++c) traj.w[(k + 1) * d + c] = traj.w[k * d + c] + dw[c];
    record_node(k + 1);
  }
  return traj;
}

}  // namespace

Trajectory simulate(const DriftSpec& spec, const PastHistory& initial, double T, double dt,
                    std::uint64_t seed, std::optional<double> stopping_radius,
                    std::uint64_t trajectory_index) {
  const std::size_t steps = step_count(T, dt);
  const NoiseStream noise(seed, trajectory_index, spec.dimension);
  Trajectory traj = run(spec, initial, dt, steps, stopping_radius,
                        [&](std::size_t k, std::span<double> out) { noise.increment(k, dt, out); });
  traj.seed = seed;
  traj.index = trajectory_index;
  traj.noise_from_stream = true;
  return traj;
}

Trajectory simulate_with_increments(const DriftSpec& spec, const PastHistory& initial, double dt,
                                    std::span<const double> increments,
                                    std::optional<double> stopping_radius) {
  const std::size_t d = spec.dimension;
  if (increments.size() % d != 0 || increments.empty()) {
    throw std::invalid_argument("simulate_with_increments: increments length mismatch");
  }
  Trajectory traj = run(spec, initial, dt, increments.size() / d, stopping_radius,
                        [&](std::size_t k, std::span<double> out) {
                          std::copy_n(increments.begin() + static_cast<long>(k * d), d, out.begin());
                        });
  traj.noise_from_stream = false;
  return traj;
}

double replay_residual(const Trajectory& traj, const DriftSpec& spec, const PastHistory& initial) {
  const std::size_t d = traj.dimension;
  PastHistory h = initial;
  register_kernels(spec, h);
  const NoiseStream noise(traj.seed, traj.index, d);
  Vector a(d);
  Vector dw(d);
  double worst = 0.0;
  for (std::size_t c = 0; c < d; ++c) worst = std::max(worst, std::abs(traj.x[c] - h.current()[c]));
  for (std::size_t k = 0; k < traj.steps; ++k) {
    evaluate_into(spec, h, a);
    if (traj.noise_from_stream) {
      noise.increment(k, traj.dt, dw);
    } else {
      const auto s = traj.dw_at(k);
      std::copy(s.begin(), s.end(), dw.begin());
    }
    const auto xk = traj.x_at(k);
    const auto xn = traj.x_at(k + 1);
    for (std::size_t c = 0; c < d; ++c) {
      worst = std::max(worst, std::abs(xn[c] - (xk[c] + a[c] * traj.dt + dw[c])));
    }
    h.push(traj.dt, xn);
  }
  return worst;
}

PathRecord to_record(const Trajectory& traj) {
  PathRecord r;
  r.grid_step = traj.dt;
  r.first_index = 0;
  r.dimension = traj.dimension;
  r.x = traj.x;
  r.w_base = traj.w;
  r.w_anchor.assign(traj.w.begin(), traj.w.begin() + static_cast<long>(traj.dimension));
  return r;
}

PathRecord splice(const PastHistory& y_past, const Trajectory& x_future, SpliceMode mode) {
  return splice(y_past, std::span<const double>(x_future.x), std::span<const double>(x_future.w),
                mode);
}

}  // namespace memsde
