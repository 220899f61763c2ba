#pragma once

#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <vector>

#include <fftw3.h>

#include "iqprint/error.hpp"
#include "iqprint/signal.hpp"

namespace iqprint::dsp {

namespace detail {
// FFTW planning is not thread-safe; execution of distinct plans is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

/// Forward DFT of `x` (length n, unnormalized).
inline std::vector<cplx> fft(const std::vector<cplx>& x) {
  const int n = static_cast<int>(x.size());
  std::vector<cplx> out(x.size());
  if (n == 0) return out;
  std::vector<cplx> in = x;
  fftw_plan plan;
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    plan = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(in.data()), reinterpret_cast<fftw_complex*>(out.data()),
                            FFTW_FORWARD, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  return out;
}

// Frequency of DFT bin `k` of an `n`-point transform, mapped to [-fs/2, fs/2).
inline double bin_frequency(std::size_t k, std::size_t n, double fs) {
  const auto half = static_cast<long long>(n / 2);
  auto kk = static_cast<long long>(k);
  if (kk >= static_cast<long long>(n) - half && kk >= half) kk -= static_cast<long long>(n);
  return static_cast<double>(kk) * fs / static_cast<double>(n);
}

/// Welch power spectral density estimate: Hann-windowed segments of `nfft`
/// samples with 50% overlap, averaged. Bins follow FFT order.
inline std::vector<double> welch_psd(const ComplexSignal& s, std::size_t nfft = 1024) {
  const std::size_t seg = std::min(nfft, s.size());
  const std::size_t hop = std::max<std::size_t>(1, seg / 2);
  std::vector<double> window(seg);
  double wpow = 0.0;
  for (std::size_t k = 0; k < seg; ++k) {
    window[k] = seg > 1 ? 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(seg))
                        : 1.0;
    wpow += window[k] * window[k];
  }
  std::vector<double> psd(nfft, 0.0);
  std::size_t segments = 0;
  std::vector<cplx> buf(nfft);
  for (std::size_t start = 0; start + seg <= s.size(); start += hop) {
    std::fill(buf.begin(), buf.end(), cplx{});
    for (std::size_t k = 0; k < seg; ++k) buf[k] = s[start + k] * window[k];
    const auto spec = fft(buf);
    for (std::size_t k = 0; k < nfft; ++k) psd[k] += std::norm(spec[k]);
    ++segments;
  }
  const double scale = 1.0 / (static_cast<double>(segments) * wpow * s.sample_rate_hz());
  for (auto& v : psd) v *= scale;
  return psd;
}

}  // namespace iqprint::dsp
