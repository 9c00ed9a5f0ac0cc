#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

namespace ddopt::fft {

using cdouble = std::complex<double>;

namespace detail {
// FFTW planning is not thread-safe; execution on distinct buffers is.
inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const noexcept { fftw_free(p); }
};
}  // namespace detail

/// One-dimensional complex transform of fixed size with its own aligned
/// work buffer. Unnormalized in both directions (FFTW convention).
class Plan {
 public:
  Plan(std::size_t n, int sign) : n_(n), buf_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n))) {
    std::lock_guard lock(detail::planner_mutex());
    plan_ = fftw_plan_dft_1d(static_cast<int>(n), buf_.get(), buf_.get(), sign, FFTW_ESTIMATE);
  }
  ~Plan() {
    std::lock_guard lock(detail::planner_mutex());
    fftw_destroy_plan(plan_);
  }
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;

  std::size_t size() const noexcept { return n_; }

  std::span<cdouble> buffer() noexcept { return {reinterpret_cast<cdouble*>(buf_.get()), n_}; }

  /// Transforms buffer() in place.
  void execute() noexcept { fftw_execute(plan_); }

 private:
  std::size_t n_;
  std::unique_ptr<fftw_complex, detail::FftwFree> buf_;
  fftw_plan plan_{};
};

/// Per-thread plan cache keyed by (size, direction).
inline Plan& plan(std::size_t n, int sign) {
  thread_local std::map<std::pair<std::size_t, int>, std::unique_ptr<Plan>> cache;
  auto& slot = cache[{n, sign}];
  if (!slot) slot = std::make_unique<Plan>(n, sign);
  return *slot;
}

inline Plan& forward(std::size_t n) { return plan(n, FFTW_FORWARD); }
inline Plan& inverse(std::size_t n) { return plan(n, FFTW_BACKWARD); }

/// Smallest 2^a 3^b 5^c >= n.
inline std::size_t good_size(std::size_t n) {
  std::size_t best = 1;
  while (best < n) best <<= 1;
  for (std::size_t p5 = 1; p5 <= best; p5 *= 5)
    for (std::size_t p35 = p5; p35 <= best; p35 *= 3)
      for (std::size_t m = p35; m <= best; m <<= 1)
        if (m >= n && m < best) best = m;
  return best;
}

inline std::vector<cdouble> transform(std::span<const cdouble> in, int sign) {
  Plan& p = plan(in.size(), sign);
  auto buf = p.buffer();
  std::copy(in.begin(), in.end(), buf.begin());
  p.execute();
  return {buf.begin(), buf.end()};
}

}  // namespace ddopt::fft
