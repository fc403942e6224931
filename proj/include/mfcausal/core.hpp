#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace mfcausal {

/// Guard used by every degenerate-variance check in the library.
inline constexpr double kVarianceEpsilon = 1e-12;

enum class ErrorCategory {
  invalid_argument,
  degenerate_input,
  numerical_failure,
  simulation_failure,
  ingestion,
  validation,
  usage,
  io,
};

constexpr std::string_view to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::invalid_argument: return "invalid-argument";
    case ErrorCategory::degenerate_input: return "degenerate-input";
    case ErrorCategory::numerical_failure: return "numerical-failure";
    case ErrorCategory::simulation_failure: return "simulation-failure";
    case ErrorCategory::ingestion: return "ingestion";
    case ErrorCategory::validation: return "validation";
    case ErrorCategory::usage: return "usage";
    case ErrorCategory::io: return "io";
  }
  return "unknown";
}

/// Base exception; every failure raised by the library carries a category so
/// the CLI can report it in machine-readable form.
class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

struct InvalidArgument : Error {
  explicit InvalidArgument(const std::string& w) : Error(ErrorCategory::invalid_argument, w) {}
};
struct DegenerateInput : Error {
  explicit DegenerateInput(const std::string& w) : Error(ErrorCategory::degenerate_input, w) {}
};
struct NumericalFailure : Error {
  explicit NumericalFailure(const std::string& w) : Error(ErrorCategory::numerical_failure, w) {}
};
struct SimulationFailure : Error {
  explicit SimulationFailure(const std::string& w) : Error(ErrorCategory::simulation_failure, w) {}
};
struct IngestionError : Error {
  explicit IngestionError(const std::string& w) : Error(ErrorCategory::ingestion, w) {}
};
struct ValidationError : Error {
  explicit ValidationError(const std::string& w) : Error(ErrorCategory::validation, w) {}
};

inline void require(bool ok, const std::string& message) {
  if (!ok) throw InvalidArgument(message);
}

/// SplitMix64 finalizer. Used to derive independent per-cell seeds so results
/// do not depend on evaluation order or thread count.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream,
                                    std::uint64_t index = 0) {
  return mix64(mix64(base ^ mix64(stream + 0x51ed270b27a3c3d1ULL)) + index);
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Work is split into
/// contiguous blocks; the first exception thrown is rethrown on the caller.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n == 0 ? 1 : n)));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      const std::size_t lo = n * w / threads;
      const std::size_t hi = n * (w + 1) / threads;
      try {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace mfcausal
