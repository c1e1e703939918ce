#include "imtree/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace imtree {

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x9e3779b9u};
  engine_.seed(seq);
}

Complex RngStream::complex_normal(double variance) {
  const double scale = std::sqrt(variance / 2.0);
  const double re = normal();
  const double im = normal();
  return {scale * re, scale * im};
}

int RngStream::uniform_int(int upper_exclusive) {
  if (upper_exclusive <= 0) throw std::invalid_argument("uniform_int requires a positive bound");
  return std::uniform_int_distribution<int>(0, upper_exclusive - 1)(engine_);
}

int RngStream::categorical(std::span<const double> probs) {
  const double u = uniform();
  double acc = 0.0;
  int last_positive = -1;
  for (int i = 0; i < static_cast<int>(probs.size()); ++i) {
    if (probs[i] <= 0.0) continue;
    last_positive = i;
    acc += probs[i];
    if (u < acc) return i;
  }
  if (last_positive < 0) throw std::invalid_argument("categorical draw from an all-zero vector");
  return last_positive;
}

}  // namespace imtree
