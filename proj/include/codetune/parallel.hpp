#ifndef CODETUNE_PARALLEL_HPP
#define CODETUNE_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace codetune {

/// Effective worker count: requested if positive, else the CODETUNE_JOBS
/// environment variable, else the machine parallelism.
int resolve_jobs(int requested);

/// Runs fn(0..count-1) on up to `jobs` threads. Each index must write only its
/// own slots; the first exception thrown by any task is rethrown after all
/// workers finish.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace codetune

#endif
