#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace memsde {

using Vector = std::vector<double>;

/// Raised when a trajectory leaves the representable range (non-finite state,
/// non-finite drift, or |X| above the blow-up threshold).
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, std::size_t last_finite_node, Vector last_finite_value)
      : std::runtime_error(what),
        last_finite_node_(last_finite_node),
        last_finite_value_(std::move(last_finite_value)) {}

  std::size_t last_finite_node() const noexcept { return last_finite_node_; }
  const Vector& last_finite_value() const noexcept { return last_finite_value_; }

 private:
  std::size_t last_finite_node_;
  Vector last_finite_value_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace memsde
