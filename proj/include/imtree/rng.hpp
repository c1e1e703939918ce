#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <span>

namespace imtree {

using Complex = std::complex<double>;

// Monte Carlo work is cut into fixed-size chunks; chunk j always draws from
// stream (seed, j), so results depend only on the seed and never on how the
// chunks are spread across threads.
inline constexpr std::int64_t kChunkSize = 4096;

class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream);

  double uniform() { return uniform_(engine_); }
  double normal() { return normal_(engine_); }
  // Circularly symmetric complex Gaussian with E|z|^2 = variance.
  Complex complex_normal(double variance);
  int uniform_int(int upper_exclusive);
  int bit() { return static_cast<int>(engine_() >> 63); }
  // Index drawn from a probability vector (entries may be zero).
  int categorical(std::span<const double> probs);

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

// Runs body(chunk_index, begin, end) for every chunk of [0, total), using up to
// `threads` workers. Chunk results must be stored by index by the caller.
template <typename Body>
void for_each_chunk(std::int64_t total, int threads, Body&& body);

}  // namespace imtree

#include "imtree/detail/chunked.hpp"
