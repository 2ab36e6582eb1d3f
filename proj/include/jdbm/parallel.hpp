/*
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include <omp.h>

namespace jdbm {

/// Execution policy for the data-parallel kernels. `serial` is the plain
/// reference loop the tests compare the OpenMP path against.
enum class Exec { serial, parallel };

/// Fixed chunk width for deterministic reductions: partial results are formed
/// per chunk and combined in chunk order, so the result does not depend on the
/// thread count or schedule.
inline constexpr std::size_t kReduceChunk = 16;

/// Evaluates `body(i, acc)` for i in [0, n) and returns the sum of the
/// accumulators. `make()` creates a zero accumulator; `Acc` needs `+=`.
template <class Acc, class Make, class Body>
Acc chunked_reduce(std::size_t n, Exec exec, Make make, Body body, std::size_t chunk = kReduceChunk) {
  if (exec == Exec::serial) {
    Acc acc = make();
    for (std::size_t i = 0; i < n; ++i) body(i, acc);
    return acc;
  }
  const std::size_t chunks = (n + chunk - 1) / chunk;
  std::vector<Acc> partial;
  partial.reserve(chunks);
  for (std::size_t c = 0; c < chunks; ++c) partial.push_back(make());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
    const std::size_t lo = static_cast<std::size_t>(c) * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    for (std::size_t i = lo; i < hi; ++i) body(i, partial[static_cast<std::size_t>(c)]);
  }
  Acc total = make();
  for (auto& p : partial) total += p;
  return total;
}

/// Runs `body(i)` for independent items.
template <class Body>
void parallel_for(std::size_t n, Exec exec, Body body) {
  if (exec == Exec::serial) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) body(static_cast<std::size_t>(i));
}

}  // namespace jdbm
