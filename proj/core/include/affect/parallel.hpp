#pragma once

#include <cstddef>
#include <functional>

namespace affect {

/// Resolves a user job count: 0 means "all hardware threads".
std::size_t resolve_jobs(std::size_t jobs);

/// Runs body(i) for i in [0, count) on up to `jobs` threads. Each index runs
/// exactly once; callers write results into slot i, so output order never
/// depends on scheduling. The first exception thrown by any body is rethrown
/// after all workers join.
void parallel_for(std::size_t count, std::size_t jobs,
                  const std::function<void(std::size_t)>& body);

}  // namespace affect
