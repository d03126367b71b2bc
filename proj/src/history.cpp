#include "memsde/history.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace memsde {

std::string_view to_string(Transform t) noexcept {
  switch (t) {
    case Transform::identity: return "identity";
    case Transform::tanh: return "tanh";
    case Transform::norm: return "norm";
  }
  return "identity";
}

Transform transform_from_string(std::string_view name) {
  if (name == "identity") return Transform::identity;
  if (name == "tanh") return Transform::tanh;
  if (name == "norm") return Transform::norm;
  throw std::invalid_argument("unknown transform '" + std::string(name) + "'");
}

void apply_transform(Transform t, std::span<const double> x, std::span<double> out) noexcept {
  switch (t) {
    case Transform::identity:
      std::copy(x.begin(), x.end(), out.begin());
      break;
    case Transform::tanh:
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::tanh(x[i]);
      break;
    case Transform::norm:
      out[0] = norm(x);
      break;
  }
}

namespace {

void check_grid_step(double grid_step) {
  if (!(grid_step > 0.0) || !std::isfinite(grid_step)) {
    throw std::invalid_argument("grid_step must be positive and finite");
  }
}

std::size_t check_samples(const std::vector<Vector>& samples) {
  if (samples.empty()) throw std::invalid_argument("window must hold at least one sample");
  const std::size_t d = samples.front().size();
  if (d == 0) throw std::invalid_argument("dimension must be at least 1");
  for (const auto& s : samples) {
    if (s.size() != d) throw std::invalid_argument("window samples have mixed dimensions");
  }
  return d;
}

void check_tail(const std::vector<TailTerm>& tail, std::size_t d) {
  for (const auto& term : tail) {
    if (term.amplitude.size() != d) throw std::invalid_argument("tail term dimension mismatch");
    if (!std::isfinite(term.rate)) throw std::invalid_argument("tail rate must be finite");
  }
}

}  // namespace

PastHistory::PastHistory(double grid_step, std::size_t dimension, std::vector<Vector> samples,
                         std::vector<TailTerm> tail)
    : grid_step_(grid_step),
      dimension_(dimension),
      capacity_(samples.size()),
      ring_(samples.size() * dimension),
      tail_(std::move(tail)),
      initial_boundary_(-static_cast<double>(samples.size() - 1) * grid_step) {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::copy(samples[i].begin(), samples[i].end(), ring_.begin() + static_cast<long>(i * dimension));
  }
  size_ = samples.size();
}

PastHistory PastHistory::zero(double grid_step, std::size_t window_steps, std::size_t dimension) {
  check_grid_step(grid_step);
  if (dimension == 0) throw std::invalid_argument("dimension must be at least 1");
  return PastHistory(grid_step, dimension,
                     std::vector<Vector>(window_steps + 1, Vector(dimension, 0.0)), {});
}

PastHistory PastHistory::sampled(double grid_step, std::vector<Vector> samples) {
  check_grid_step(grid_step);
  const std::size_t d = check_samples(samples);
  return PastHistory(grid_step, d, std::move(samples), {});
}

PastHistory PastHistory::with_tail(double grid_step, std::vector<Vector> samples,
                                   std::vector<TailTerm> tail) {
  check_grid_step(grid_step);
  const std::size_t d = check_samples(samples);
  check_tail(tail, d);
  return PastHistory(grid_step, d, std::move(samples), std::move(tail));
}

PastHistory PastHistory::analytic(double grid_step, std::size_t window_steps,
                                  std::vector<TailTerm> terms) {
  check_grid_step(grid_step);
  if (terms.empty()) throw std::invalid_argument("analytic past needs at least one term");
  const std::size_t d = terms.front().amplitude.size();
  if (d == 0) throw std::invalid_argument("dimension must be at least 1");
  check_tail(terms, d);
  std::vector<Vector> samples(window_steps + 1, Vector(d, 0.0));
  for (std::size_t i = 0; i <= window_steps; ++i) {
    const double age = static_cast<double>(window_steps - i) * grid_step;
    for (const auto& term : terms) {
      const double f = std::exp(term.rate * age);
      for (std::size_t c = 0; c < d; ++c) samples[i][c] += term.amplitude[c] * f;
    }
  }
  return PastHistory(grid_step, d, std::move(samples), std::move(terms));
}

PastHistory PastHistory::restore(double grid_step, std::vector<Vector> window,
                                 std::vector<TailTerm> tail, double initial_boundary,
                                 std::uint64_t pushes, std::uint64_t dropped,
                                 std::vector<KernelAccumulator> accumulators) {
  check_grid_step(grid_step);
  const std::size_t d = check_samples(window);
  check_tail(tail, d);
  PastHistory h(grid_step, d, std::move(window), std::move(tail));
  h.initial_boundary_ = initial_boundary;
  h.pushes_ = pushes;
  h.dropped_ = dropped;
  for (auto& acc : accumulators) {
    const std::size_t width = transform_width(acc.transform, d);
    if (!(acc.rate > 0.0) || acc.value.size() != width || acc.tail.size() != width) {
      throw std::invalid_argument("malformed accumulator in restored history");
    }
    acc.decay = std::exp(-acc.rate * grid_step);
    acc.total.resize(width);
    for (std::size_t i = 0; i < width; ++i) acc.total[i] = acc.value[i] + acc.tail[i];
    acc.last_phi.assign(width, 0.0);
    apply_transform(acc.transform, h.current(), acc.last_phi);
  }
  h.accumulators_ = std::move(accumulators);
  return h;
}

std::span<const double> PastHistory::sample(std::size_t i) const noexcept {
  const std::size_t slot = (start_ + i) % capacity_;
  return {ring_.data() + slot * dimension_, dimension_};
}

std::vector<Vector> PastHistory::window() const {
  std::vector<Vector> out;
  out.reserve(size_);
  for (std::size_t i = 0; i < size_; ++i) {
    const auto s = sample(i);
    out.emplace_back(s.begin(), s.end());
  }
  return out;
}

void PastHistory::reserve_window(std::size_t capacity) {
  if (capacity <= capacity_) return;
  std::vector<double> ring(capacity * dimension_);
  for (std::size_t i = 0; i < size_; ++i) {
    const auto s = sample(i);
    std::copy(s.begin(), s.end(), ring.begin() + static_cast<long>(i * dimension_));
  }
  ring_ = std::move(ring);
  capacity_ = capacity;
  start_ = 0;
}

Vector PastHistory::tail_integral(double rate, Transform transform) const {
  const std::size_t width = transform_width(transform, dimension_);
  Vector out(width, 0.0);
  if (tail_.empty()) return out;
  const double b = tail_boundary();
  const double age = tail_origin() - b;  // >= 0
  // One-term norm and the identity are closed form; everything else goes
  // through u = exp(-c*tau), which maps the tail onto a bounded integrand.
  const bool closed = transform == Transform::identity ||
                      (transform == Transform::norm && tail_.size() == 1);
  if (closed) {
    for (const auto& term : tail_) {
      const double scale = std::exp(term.rate * age + rate * b) / (rate - term.rate);
      if (transform == Transform::identity) {
        for (std::size_t c = 0; c < width; ++c) out[c] += term.amplitude[c] * scale;
      } else {
        out[0] += norm(term.amplitude) * scale;
      }
    }
    return out;
  }
  double max_rate = 0.0;
  for (const auto& term : tail_) max_rate = std::max(max_rate, term.rate);
  const double c = rate - max_rate;
  constexpr std::size_t kNodes = 1 << 16;
  Vector x(dimension_);
  Vector phi(width);
  for (std::size_t k = 0; k < kNodes; ++k) {
    const double u = (static_cast<double>(k) + 0.5) / static_cast<double>(kNodes);
    const double tau = -std::log(u) / c;
    std::fill(x.begin(), x.end(), 0.0);
    for (const auto& term : tail_) {
      const double f = std::exp(term.rate * (age + tau));
      for (std::size_t i = 0; i < dimension_; ++i) x[i] += term.amplitude[i] * f;
    }
    apply_transform(transform, x, phi);
    const double weight = std::pow(u, rate / c - 1.0) / c / static_cast<double>(kNodes);
    for (std::size_t i = 0; i < width; ++i) out[i] += weight * phi[i];
  }
  const double front = std::exp(rate * b);
  for (auto& v : out) v *= front;
  return out;
}

void PastHistory::register_kernel(double rate, Transform transform) {
  if (!(rate > 0.0) || !std::isfinite(rate)) {
    throw std::invalid_argument("kernel rate must be positive and finite");
  }
  if (has_kernel(rate, transform)) return;
  if (!intact()) {
    throw std::logic_error("cannot register a kernel after window samples were dropped");
  }
  for (const auto& term : tail_) {
    if (!(term.rate < rate)) {
      throw std::invalid_argument("tail growth rate must be below every kernel rate");
    }
  }
  KernelAccumulator acc;
  acc.rate = rate;
  acc.transform = transform;
  acc.decay = std::exp(-rate * grid_step_);
  const std::size_t width = transform_width(transform, dimension_);
  acc.value.assign(width, 0.0);
  acc.last_phi.assign(width, 0.0);
  Vector phi(width);
  apply_transform(transform, sample(0), acc.last_phi);
  const double half = 0.5 * grid_step_;
  for (std::size_t i = 1; i < size_; ++i) {
    apply_transform(transform, sample(i), phi);
    for (std::size_t c = 0; c < width; ++c) {
      acc.value[c] = acc.decay * acc.value[c] + half * (acc.decay * acc.last_phi[c] + phi[c]);
    }
    acc.last_phi = phi;
  }
  acc.tail = tail_integral(rate, transform);
  acc.total.resize(width);
  for (std::size_t c = 0; c < width; ++c) acc.total[c] = acc.value[c] + acc.tail[c];
  accumulators_.push_back(std::move(acc));
}

bool PastHistory::has_kernel(double rate, Transform transform) const noexcept {
  return std::any_of(accumulators_.begin(), accumulators_.end(), [&](const KernelAccumulator& a) {
    return a.rate == rate && a.transform == transform;
  });
}

std::size_t PastHistory::kernel_index(double rate, Transform transform) const {
  for (std::size_t i = 0; i < accumulators_.size(); ++i) {
    if (accumulators_[i].rate == rate && accumulators_[i].transform == transform) return i;
  }
  throw std::invalid_argument("kernel (rate=" + std::to_string(rate) + ", " +
                              std::string(to_string(transform)) + ") is not registered");
}

std::span<const double> PastHistory::kernel_integral(double rate, Transform transform) const {
  return accumulators_[kernel_index(rate, transform)].total;
}

void PastHistory::push(double dt, std::span<const double> value) {
  if (!(dt > 0.0)) throw std::invalid_argument("push_sample: dt must be positive");
  if (std::abs(dt - grid_step_) > 1e-12 * grid_step_) {
    throw std::invalid_argument("push_sample: dt must equal the history grid step");
  }
  if (value.size() != dimension_) throw std::invalid_argument("push_sample: dimension mismatch");

  const double half = 0.5 * grid_step_;
  for (auto& acc : accumulators_) {
    const std::size_t width = acc.value.size();
    double phi_buf[16];
    std::vector<double> phi_heap;
    std::span<double> phi;
    if (width <= 16) {
      phi = {phi_buf, width};
    } else {
      phi_heap.resize(width);
      phi = phi_heap;
    }
    apply_transform(acc.transform, value, phi);
    for (std::size_t c = 0; c < width; ++c) {
      acc.value[c] = acc.decay * acc.value[c] + half * (acc.decay * acc.last_phi[c] + phi[c]);
      acc.tail[c] *= acc.decay;
      acc.total[c] = acc.value[c] + acc.tail[c];
      acc.last_phi[c] = phi[c];
    }
  }

  std::size_t slot;
  if (size_ < capacity_) {
    slot = (start_ + size_) % capacity_;
    ++size_;
  } else {
    slot = start_;
    start_ = (start_ + 1) % capacity_;
    ++dropped_;
  }
  std::copy(value.begin(), value.end(), ring_.begin() + static_cast<long>(slot * dimension_));
  ++pushes_;
}

PastHistory push_sample(PastHistory h, double dt, std::span<const double> value) {
  h.push(dt, value);
  return h;
}

std::span<const double> kernel_integral(const PastHistory& h, double rate, Transform transform) {
  return h.kernel_integral(rate, transform);
}

double lu_metric(double grid_step, std::size_t dimension, std::span<const double> f,
                 std::span<const double> g, int n_max) {
  if (f.size() != g.size() || dimension == 0 || f.size() % dimension != 0) {
    throw std::invalid_argument("lu_metric: paths do not share a grid");
  }
  if (n_max < 1) throw std::invalid_argument("lu_metric: n_max must be positive");
  const std::size_t count = f.size() / dimension;
  const double span = static_cast<double>(count - 1) * grid_step;
  if (span + 1e-9 * grid_step < static_cast<double>(n_max)) {
    throw std::invalid_argument("lu_metric: n_max exceeds the stored window");
  }
  double total = 0.0;
  double running_max = 0.0;
  std::size_t back = 0;  // samples consumed from the most recent end
  double weight = 0.5;
  for (int n = 1; n <= n_max; ++n) {
    const double horizon = static_cast<double>(n) + 1e-9 * grid_step;
    while (back < count && static_cast<double>(back) * grid_step <= horizon) {
      const std::size_t i = count - 1 - back;
      double sq = 0.0;
      for (std::size_t c = 0; c < dimension; ++c) {
        const double diff = f[i * dimension + c] - g[i * dimension + c];
        sq += diff * diff;
      }
      running_max = std::max(running_max, std::sqrt(sq));
      ++back;
    }
    total += weight * std::min(running_max, 1.0);
    weight *= 0.5;
  }
  return total;
}

double lu_metric(const PastHistory& f, const PastHistory& g, int n_max) {
  if (f.grid_step() != g.grid_step() || f.dimension() != g.dimension() ||
      f.window_size() != g.window_size()) {
    throw std::invalid_argument("lu_metric: paths do not share a grid");
  }
  std::vector<double> a;
  std::vector<double> b;
  for (std::size_t i = 0; i < f.window_size(); ++i) {
    const auto fs = f.sample(i);
    const auto gs = g.sample(i);
    a.insert(a.end(), fs.begin(), fs.end());
    b.insert(b.end(), gs.begin(), gs.end());
  }
  return lu_metric(f.grid_step(), f.dimension(), a, b, n_max);
}

std::optional<std::size_t> PathRecord::position_of(std::int64_t k) const noexcept {
  const std::int64_t pos = k - first_index;
  if (pos < 0 || pos >= static_cast<std::int64_t>(size())) return std::nullopt;
  return static_cast<std::size_t>(pos);
}

PathRecord splice(const PastHistory& y_past, std::span<const double> x_future,
                  std::span<const double> w_future, SpliceMode mode) {
  const std::size_t d = y_past.dimension();
  if (x_future.empty() || x_future.size() % d != 0) {
    throw std::invalid_argument("splice: future path dimension mismatch");
  }
  if (!w_future.empty() && w_future.size() != x_future.size()) {
    throw std::invalid_argument("splice: future W length mismatch");
  }
  if (mode == SpliceMode::girsanov) {
    const auto y0 = y_past.current();
    for (std::size_t c = 0; c < d; ++c) {
      if (y0[c] != x_future[c]) {
        throw std::invalid_argument("splice: Girsanov mode requires y_past(0) == X(0)");
      }
    }
  }
  PathRecord out;
  out.grid_step = y_past.grid_step();
  out.dimension = d;
  const std::size_t past_count = y_past.window_size() - 1;
  out.first_index = -static_cast<std::int64_t>(past_count);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < past_count; ++i) {
    const auto s = y_past.sample(i);
    out.x.insert(out.x.end(), s.begin(), s.end());
    out.w_base.insert(out.w_base.end(), d, nan);
  }
  out.x.insert(out.x.end(), x_future.begin(), x_future.end());
  if (w_future.empty()) {
    out.w_base.insert(out.w_base.end(), x_future.size(), nan);
    out.w_anchor.assign(d, 0.0);
  } else {
    out.w_base.insert(out.w_base.end(), w_future.begin(), w_future.end());
    out.w_anchor.assign(w_future.begin(), w_future.begin() + static_cast<long>(d));
  }
  return out;
}

PathRecord shift(const PathRecord& path, double s) {
  const double steps = s / path.grid_step;
  const double m = std::round(steps);
  if (std::abs(steps - m) > 1e-9) {
    throw std::invalid_argument("shift: s must be a multiple of the grid step");
  }
  const auto shift_index = static_cast<std::int64_t>(m);
  const auto origin = path.position_of(-shift_index);
  if (!origin) throw std::invalid_argument("shift: insufficient stored range");
  PathRecord out = path;
  out.first_index = path.first_index + shift_index;
  for (std::size_t c = 0; c < path.dimension; ++c) {
    const double anchor = path.w_base[*origin * path.dimension + c];
    if (std::isnan(anchor)) {
      throw std::invalid_argument("shift: W is not recorded at the new origin");
    }
    out.w_anchor[c] = anchor;
  }
  return out;
}

}  // namespace memsde
