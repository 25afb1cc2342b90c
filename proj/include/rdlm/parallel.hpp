#pragma once

#include <functional>

namespace rdlm {

// Runs fn(i) for i in [0, n) on up to `threads` workers. Work is split by
// index stride, so any output written to slot i is identical whatever the
// thread count.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

// Thread count from the RDLM_THREADS environment variable, else `fallback`.
int thread_count_from_env(int fallback);

}  // namespace rdlm
