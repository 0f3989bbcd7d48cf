#pragma once

namespace qif {

// Every data-parallel kernel in the library takes one of these. The serial
// policy is the reference path; tests assert the OpenMP path is bit-identical
// to it, which holds because work is addressed by index (per-index RNG
// substreams, results written to per-index slots, reductions done serially).
enum class ExecPolicy { serial, openmp };

namespace detail {
void omp_for_impl(int count, void* ctx, void (*fn)(void*, int));
}

template <typename F>
void for_index(ExecPolicy policy, int count, F&& f) {
  if (policy == ExecPolicy::openmp) {
    auto thunk = [](void* ctx, int i) { (*static_cast<F*>(ctx))(i); };
    detail::omp_for_impl(count, &f, thunk);
    return;
  }
  for (int i = 0; i < count; ++i) f(i);
}

int max_threads();
void set_threads(int n);

}  // namespace qif
