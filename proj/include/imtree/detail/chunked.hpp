#pragma once

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace imtree {

template <typename Body>
void for_each_chunk(std::int64_t total, int threads, Body&& body) {
  const std::int64_t chunks = (total + kChunkSize - 1) / kChunkSize;
  auto run = [&](std::int64_t chunk) {
    const std::int64_t begin = chunk * kChunkSize;
    body(chunk, begin, std::min(total, begin + kChunkSize));
  };
  const int workers = static_cast<int>(std::clamp<std::int64_t>(threads, 1, std::max<std::int64_t>(chunks, 1)));
  if (workers <= 1) {
    for (std::int64_t c = 0; c < chunks; ++c) run(c);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::int64_t c = next++; c < chunks; c = next++) run(c);
    });
  }
}

}  // namespace imtree
