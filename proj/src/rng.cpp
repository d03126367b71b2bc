#include "memsde/rng.hpp"

namespace memsde {

std::vector<std::vector<double>> wiener_increments(const NoiseStream& stream, std::uint64_t first,
                                                   std::uint64_t count, double dt) {
  std::vector<std::vector<double>> out;
  out.reserve(count);
  for (std::uint64_t k = first; k < first + count; ++k) out.push_back(stream.increment(k, dt));
  return out;
}

}  // namespace memsde
