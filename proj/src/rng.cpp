#include "critique_rl/rng.hpp"

#include <iostream>
#include <numeric>

#include "critique_rl/errors.hpp"

namespace crl {

void log_warning(const std::string& message) { std::cerr << "warning: " << message << '\n'; }

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RngStream RngStream::derive(std::uint64_t seed, std::uint64_t index) {
  return RngStream(mix64(mix64(seed) ^ index));
}

RngStream RngStream::derive(std::uint64_t seed, std::uint64_t index, std::uint64_t sub) {
  return RngStream(mix64(mix64(mix64(seed) ^ index) ^ sub));
}

std::size_t RngStream::uniform_index(std::size_t n) {
  if (n == 0) {
    throw InputError("uniform_index: empty range");
  }
  auto i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
  return i < n ? i : n - 1;
}

std::size_t RngStream::categorical(std::span<const double> weights) {
  if (weights.empty()) {
    throw InputError("categorical: no weights");
  }
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  const double u = uniform() * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] > 0.0) {
      last_positive = i;
    }
    acc += weights[i];
    if (u < acc) {
      return i;
    }
  }
  // u == total up to rounding
  return last_positive;
}

}  // namespace crl
