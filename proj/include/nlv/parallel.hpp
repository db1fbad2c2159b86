#pragma once
// Chunked parallel loops. In deterministic mode the chunk count is fixed, so
// per-chunk partial results merged in chunk order do not depend on the
// number of threads.

#include <functional>

namespace nlv {

/// NLV_THREADS if set, else the hardware concurrency (at least 1).
int thread_count();
void set_thread_count(int n);

bool deterministic();
void set_deterministic(bool on);

inline constexpr int kDeterministicChunks = 64;

/// Number of chunks used for n items.
int chunk_count(int n);

/// Calls body(chunk, begin, end) for each chunk of [0, n), distributed over
/// the worker threads. Exceptions are rethrown on the calling thread.
void parallel_chunks(int n, const std::function<void(int, int, int)>& body);

}  // namespace nlv
