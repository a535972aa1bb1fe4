#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

namespace g2l {

/// Worker count from the G2L_THREADS environment variable (default 1).
int thread_count();

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index is
/// handled exactly once; callers write to disjoint outputs.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, int threads = thread_count());

/// SplitMix64 finalizer, used to derive independent seeds from (seed, tag...).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c);

}  // namespace g2l
