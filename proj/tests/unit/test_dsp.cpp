#include <gtest/gtest.h>

#include <numbers>
#include <random>
#include <set>

#include "iqprint/dsp/augment.hpp"
#include "iqprint/dsp/baseband.hpp"
#include "iqprint/dsp/butterworth.hpp"
#include "iqprint/dsp/crop.hpp"
#include "iqprint/dsp/decimate.hpp"
#include "iqprint/dsp/preprocess.hpp"
#include "iqprint/dsp/spectrum.hpp"

using namespace iqprint;
using namespace iqprint::dsp;

namespace {

constexpr double kFs = 100e6;

ComplexSignal noise(std::size_t n, std::uint64_t seed, double fs = kFs) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> v(2 * n);
  for (auto& x : v) x = g(rng);
  return ComplexSignal(std::move(v), SignalInfo{fs});
}

ComplexSignal tone(std::size_t n, double f, double fs = kFs, double amp = 1.0) {
  std::vector<cplx> z(n);
  for (std::size_t k = 0; k < n; ++k) z[k] = std::polar(amp, 2.0 * std::numbers::pi * f * static_cast<double>(k) / fs);
  return ComplexSignal::from_complex(z, SignalInfo{fs});
}

double max_abs_diff(const ComplexSignal& a, const ComplexSignal& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.interleaved().size(); ++k)
    m = std::max(m, std::abs(a.interleaved()[k] - b.interleaved()[k]));
  return m;
}

// Strongest FFT bin frequency.
double fft_peak_hz(const ComplexSignal& s) {
  const auto spec = fft(s.to_complex());
  std::size_t best = 0;
  for (std::size_t k = 1; k < spec.size(); ++k)
    if (std::abs(spec[k]) > std::abs(spec[best])) best = k;
  return bin_frequency(best, spec.size(), s.sample_rate_hz());
}

}  // namespace

// --- bandpass design ------------------------------------------------------

// Reference magnitudes from an independent design (scipy.signal.butter, order 3,
// bandpass, fs = 100 MHz, second-order sections).
TEST(Butterworth, MatchesReferenceDesign) {
  const auto f = design_butterworth_bandpass(25e3, 20e6, 3, kFs);
  EXPECT_EQ(f.sections.size(), 3u);
  EXPECT_TRUE(f.stable());
  EXPECT_NEAR(f.magnitude_db(1e3, kFs), -83.904544, 1e-3);
  EXPECT_NEAR(f.magnitude_db(25e3, kFs), -3.0103, 1e-4);
  EXPECT_NEAR(f.magnitude_db(20e6, kFs), -3.0103, 1e-4);
  EXPECT_NEAR(f.magnitude_db(45e6, kFs), -56.369408, 1e-3);
}

TEST(Butterworth, CutoffsDcAndMidband) {
  const auto f = design_butterworth_bandpass(25e3, 20e6, 3, kFs);
  EXPECT_NEAR(f.magnitude_db(25e3, kFs), -3.01, 0.1);
  EXPECT_NEAR(f.magnitude_db(20e6, kFs), -3.01, 0.1);
  EXPECT_LT(std::abs(f.response(0.0, kFs)), 1e-4);  // < -80 dB
  EXPECT_GE(f.magnitude_db(std::sqrt(25e3 * 20e6), kFs), -0.2);
}

TEST(Butterworth, MonotoneInStopbands) {
  const auto f = design_butterworth_bandpass(25e3, 20e6, 3, kFs);
  double prev = -1e9;
  for (double hz = 10.0; hz <= 25e3; hz *= 1.1) {
    const double m = f.magnitude_db(hz, kFs);
    EXPECT_GT(m, prev);
    prev = m;
  }
  prev = 1e9;
  for (double hz = 20e6; hz < 50e6; hz += 5e5) {
    const double m = f.magnitude_db(hz, kFs);
    EXPECT_LT(m, prev);
    prev = m;
  }
}

TEST(Butterworth, OtherOrdersHitCutoffs) {
  for (int order : {1, 2, 4, 5}) {
    const auto f = design_butterworth_bandpass(1e6, 10e6, order, kFs);
    EXPECT_TRUE(f.stable());
    EXPECT_NEAR(f.magnitude_db(1e6, kFs), -3.0103, 1e-3) << order;
    EXPECT_NEAR(f.magnitude_db(10e6, kFs), -3.0103, 1e-3) << order;
  }
}

TEST(Butterworth, LowpassReference) {
  const auto f = design_butterworth_lowpass(25e6, 3, kFs);
  EXPECT_NEAR(f.magnitude_db(0.0, kFs), 0.0, 1e-9);
  EXPECT_NEAR(f.magnitude_db(25e6, kFs), -3.01029996, 1e-6);
  EXPECT_NEAR(f.magnitude_db(40e6, kFs), -29.29854491, 1e-5);
}

TEST(Butterworth, RejectsBadCutoffs) {
  EXPECT_THROW(design_butterworth_bandpass(0.0, 20e6, 3, kFs), ParameterError);
  EXPECT_THROW(design_butterworth_bandpass(30e6, 20e6, 3, kFs), ParameterError);
  EXPECT_THROW(design_butterworth_bandpass(25e3, 50e6, 3, kFs), ParameterError);
  EXPECT_THROW(design_butterworth_bandpass(25e3, 20e6, 0, kFs), ParameterError);
  EXPECT_THROW(design_butterworth_lowpass(60e6, 3, kFs), ParameterError);
}

// --- filtering ------------------------------------------------------------

TEST(FilterApply, ImpulseResponseMatchesReference) {
  const auto f = design_butterworth_bandpass(25e3, 20e6, 3, kFs);
  std::vector<double> imp(512, 0.0);
  imp[0] = 1.0;
  const auto h = filter_apply(f, ComplexSignal(imp, SignalInfo{kFs}));
  const std::pair<std::size_t, double> ref[] = {{0, 0.09824032},  {1, 0.3513129},   {2, 0.45539554},
                                                {5, -0.09708607}, {10, -0.00998387}, {50, -0.00290769},
                                                {255, -0.00201521}};
  for (auto [k, v] : ref) EXPECT_NEAR(h.i(k), v, 1e-7) << k;
  for (std::size_t k = 0; k < 256; ++k) EXPECT_EQ(h.q(k), 0.0);
}

TEST(FilterApply, ImpulseResponseMatchesTransferFunctionIdft) {
  // A narrower band keeps the impulse response short enough that a 4096-point
  // inverse DFT of H(e^jw) has negligible time aliasing in the first 256 taps.
  const double fs = 1e6;
  const auto f = design_butterworth_bandpass(50e3, 200e3, 3, fs);
  const std::size_t n = 4096;
  std::vector<cplx> hf(n);
  for (std::size_t k = 0; k < n; ++k) hf[k] = f.response(static_cast<double>(k) * fs / static_cast<double>(n), fs);
  // Inverse DFT via conj(FFT(conj(x))) / n.
  for (auto& v : hf) v = std::conj(v);
  auto h = fft(hf);
  for (auto& v : h) v = std::conj(v) / static_cast<double>(n);

  std::vector<double> imp(2 * n, 0.0);
  imp[0] = 1.0;
  const auto y = filter_apply(f, ComplexSignal(imp, SignalInfo{fs}));
  for (std::size_t k = 0; k < 256; ++k) {
    EXPECT_NEAR(y.i(k), h[k].real(), 1e-6) << k;
    EXPECT_NEAR(h[k].imag(), 0.0, 1e-9);
  }
}

TEST(FilterApply, ZeroInZeroOut) {
  const auto f = design_butterworth_bandpass(25e3, 20e6, 3, kFs);
  const auto y = filter_apply(f, ComplexSignal(std::vector<double>(200, 0.0), SignalInfo{kFs}));
  for (double v : y.interleaved()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(y.size(), 100u);
}

TEST(FilterApply, Linearity) {
  const auto f = design_butterworth_bandpass(25e3, 20e6, 3, kFs);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = noise(777, rng()), y = noise(777, rng());
    const double a = u(rng), b = u(rng);
    std::vector<double> mix(x.interleaved().size());
    for (std::size_t k = 0; k < mix.size(); ++k) mix[k] = a * x.interleaved()[k] + b * y.interleaved()[k];
    const auto lhs = filter_apply(f, x.with_samples(mix));
    const auto fx = filter_apply(f, x), fy = filter_apply(f, y);
    for (std::size_t k = 0; k < mix.size(); ++k)
      EXPECT_NEAR(lhs.interleaved()[k], a * fx.interleaved()[k] + b * fy.interleaved()[k], 1e-9);
  }
}

TEST(FilterApply, IqStreamsIndependentAndStateReset) {
  const auto f = design_butterworth_bandpass(25e3, 20e6, 3, kFs);
  const auto x = noise(300, 4);
  const auto first = filter_apply(f, x);
  EXPECT_EQ(filter_apply(f, x), first);
  std::vector<double> only_i(x.interleaved().begin(), x.interleaved().end());
  for (std::size_t k = 0; k < x.size(); ++k) only_i[2 * k + 1] = 0.0;
  const auto yi = filter_apply(f, x.with_samples(only_i));
  for (std::size_t k = 0; k < x.size(); ++k) {
    EXPECT_EQ(yi.i(k), first.i(k));
    EXPECT_EQ(yi.q(k), 0.0);
  }
}

TEST(FilterApply, DcRejectedInSteadyState) {
  const auto f = design_butterworth_bandpass(25e3, 20e6, 3, kFs);
  // DC plus an in-band tone; after the transient the DC component is gone.
  const std::size_t n = 200000;
  std::vector<double> v(2 * n);
  for (std::size_t k = 0; k < n; ++k) {
    v[2 * k] = 1.0 + std::cos(2.0 * std::numbers::pi * 1e6 * static_cast<double>(k) / kFs);
    v[2 * k + 1] = 0.5;
  }
  const auto y = filter_apply(f, ComplexSignal(v, SignalInfo{kFs}));
  double mi = 0.0, mq = 0.0;
  const std::size_t tail = 100000;  // exactly 1000 periods of the 1 MHz tone
  for (std::size_t k = n - tail; k < n; ++k) {
    mi += y.i(k);
    mq += y.q(k);
  }
  EXPECT_LT(std::abs(mi / tail), 2e-3);
  EXPECT_LT(std::abs(mq / tail), 1e-3);
}

// --- baseband -------------------------------------------------------------

TEST(Baseband, KnownCenterMovesToneToDc) {
  const auto x = tone(6400, 10e6);
  const auto y = baseband(x, KnownCenter{10e6});
  // Constant phase: every sample within rounding of the first.
  for (std::size_t k = 0; k < y.size(); ++k) EXPECT_LT(std::abs(y[k] - y[0]), 1e-9);
  // Residual frequency by phase slope across the window.
  const double residual = std::arg(y[y.size() - 1] / y[0]) / (2.0 * std::numbers::pi) * kFs / (y.size() - 1);
  EXPECT_LT(std::abs(residual), 1.0);
  EXPECT_NEAR(fft_peak_hz(y), 0.0, 1e-9);
}

TEST(Baseband, ZeroShiftIsIdentity) {
  const auto x = noise(100, 1);
  EXPECT_EQ(baseband(x, KnownCenter{0.0}), x);
  EXPECT_EQ(baseband(x, NoBaseband{}), x);
}

TEST(Baseband, ShiftThenUnshift) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-49e6, 49e6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = noise(6400, rng());
    const double f = u(rng);
    EXPECT_LT(max_abs_diff(frequency_shift(frequency_shift(x, f), -f), x), 1e-9);
  }
}

TEST(Baseband, EstimatePsdPeak) {
  std::mt19937_64 rng(2);
  const auto t = tone(8192, 12.5e6);  // exactly on a 1024-bin grid point
  std::vector<double> v(t.interleaved().begin(), t.interleaved().end());
  std::normal_distribution<double> g(0.0, 0.05);
  for (auto& x : v) x += g(rng);
  const auto x = t.with_samples(v);
  EXPECT_NEAR(psd_peak_frequency(x), 12.5e6, kFs / 1024);
  EXPECT_NEAR(fft_peak_hz(baseband(x, EstimatePsdPeak{1024})), 0.0, kFs / 8192 + 1e-6);
}

TEST(Baseband, ErrorsOnZeroSignalAndOutOfRange) {
  const ComplexSignal z(std::vector<double>(64, 0.0), SignalInfo{kFs});
  try {
    baseband(z, EstimatePsdPeak{16});
    FAIL();
  } catch (const ParameterError& e) {
    EXPECT_NE(std::string(e.what()).find("no spectral peak"), std::string::npos);
  }
  EXPECT_THROW(frequency_shift(noise(8, 1), 60e6), ParameterError);
}

// --- decimation -----------------------------------------------------------

TEST(Decimate, FactorTwoSplitsPhases) {
  std::vector<double> v(16);
  for (std::size_t k = 0; k < 8; ++k) {
    v[2 * k] = static_cast<double>(k);
    v[2 * k + 1] = 10.0 + static_cast<double>(k);
  }
  const auto out = decimate(ComplexSignal(v, SignalInfo{kFs}), 2, false);
  ASSERT_EQ(out.size(), 2u);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(out[0][k], cplx(2.0 * k, 10.0 + 2.0 * k));
    EXPECT_EQ(out[1][k], cplx(2.0 * k + 1, 11.0 + 2.0 * k));
  }
  EXPECT_DOUBLE_EQ(out[0].sample_rate_hz(), kFs / 2);
}

TEST(Decimate, FactorOneIsIdentity) {
  const auto x = noise(33, 2);
  const auto out = decimate(x, 1, true);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0], x);
}

TEST(Decimate, MaxFactorForTwentyMegahertz) {
  EXPECT_EQ(max_decimation(100e6, 20e6), 2u);
  EXPECT_EQ(max_decimation(100e6, 5e6), 10u);
  EXPECT_THROW(max_decimation(100e6, 60e6), ParameterError);
}

TEST(Decimate, InterleavingReconstructsPrefix) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t m = 1 + rng() % 7, n = m + rng() % 200;
    const auto x = noise(n, rng());
    const auto out = decimate(x, m, false);
    ASSERT_EQ(out.size(), m);
    const std::size_t len = n / m;
    for (std::size_t k = 0; k < len * m; ++k) EXPECT_EQ(out[k % m][k / m], x[k]);
  }
}

TEST(Decimate, AntialiasAttenuatesAliasBand) {
  // A 40 MHz tone folds onto 10 MHz at M = 2; the anti-alias lowpass at 25 MHz
  // must suppress it well below an in-band 5 MHz tone.
  const auto hi = tone(8192, 40e6), lo = tone(8192, 5e6);
  const auto out_hi = decimate(hi, 2, true)[0], out_lo = decimate(lo, 2, true)[0];
  auto power = [](const ComplexSignal& s) {
    double p = 0.0;
    for (std::size_t k = 1000; k < s.size(); ++k) p += std::norm(s[k]);
    return p;
  };
  EXPECT_LT(10.0 * std::log10(power(out_hi) / power(out_lo)), -25.0);
}

TEST(Decimate, Errors) {
  EXPECT_THROW(decimate(noise(8, 1), 0, false), ParameterError);
  EXPECT_THROW(decimate(noise(3, 1), 4, false), ParameterError);
}

// --- cropping -------------------------------------------------------------

TEST(Crop, Lengths) {
  EXPECT_EQ(crop_length(6400, 6), 1066u);
  EXPECT_EQ(crop_length(6400, 1), 6400u);
  EXPECT_THROW(crop_length(5, 6), ParameterError);
  EXPECT_THROW(crop_length(5, 0), ParameterError);
}

TEST(Crop, SingleDrawsCoverPermutation) {
  const auto x = noise(6400, 3);
  CropScheduler sched(6, 17);
  for (int cycle = 0; cycle < 5; ++cycle) {
    std::set<std::size_t> seen;
    for (int k = 0; k < 6; ++k) seen.insert(sched.next_part(0));
    EXPECT_EQ(seen.size(), 6u);
    EXPECT_EQ(*seen.rbegin(), 5u);
  }
}

TEST(Crop, PartsAreContiguousSlices) {
  const auto x = noise(6400, 4);
  CropScheduler sched(6, 1);
  for (int k = 0; k < 12; ++k) {
    const auto c = random_crop(x, 9, sched);
    ASSERT_EQ(c.size(), 1066u);
    bool found = false;
    for (std::size_t p = 0; p < 6 && !found; ++p) found = c == x.slice(p * 1066, 1066);
    EXPECT_TRUE(found);
  }
}

TEST(Crop, WholeSignalForOnePart) {
  const auto x = noise(100, 5);
  CropScheduler sched(1, 0);
  EXPECT_EQ(random_crop(x, 0, sched), x);
}

TEST(Crop, DeterministicPerSeedAndIndependentPerSignal) {
  CropScheduler a(6, 5), b(6, 5);
  for (int k = 0; k < 30; ++k) EXPECT_EQ(a.next_part(static_cast<std::size_t>(k % 3)), b.next_part(static_cast<std::size_t>(k % 3)));
  CropScheduler c(4, 8);
  for (std::size_t id = 0; id < 10; ++id) {
    std::set<std::size_t> seen;
    for (int k = 0; k < 4; ++k) seen.insert(c.next_part(id));
    EXPECT_EQ(seen.size(), 4u);
  }
}

TEST(Crop, TooManyParts) {
  CropScheduler sched(10, 0);
  EXPECT_THROW(random_crop(noise(5, 1), 0, sched), ParameterError);
}

// --- rotation, scaling, channel ------------------------------------------

TEST(Augment, QuarterTurn) {
  const ComplexSignal x({1.0, 0.0}, SignalInfo{kFs});
  const auto y = rotate(x, std::numbers::pi / 2);
  EXPECT_NEAR(y.i(0), 0.0, 1e-15);
  EXPECT_NEAR(y.q(0), 1.0, 1e-15);
}

TEST(Augment, RotationInverseAndIsometry) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = noise(500, rng());
    const double th = u(rng);
    EXPECT_LT(max_abs_diff(rotate(rotate(x, th), -th), x), 1e-9);
    const auto y = rotate(x, th);
    for (std::size_t k = 0; k < x.size(); ++k) EXPECT_NEAR(std::abs(y[k]), std::abs(x[k]), 1e-12);
  }
}

TEST(Augment, ScalePreservesPhaseAndCommutesWithRotation) {
  std::mt19937_64 rng(11);
  const auto x = noise(500, 12);
  const auto y = scale(x, 2.5);
  for (std::size_t k = 0; k < x.size(); ++k) EXPECT_NEAR(std::arg(y[k]), std::arg(x[k]), 1e-15);
  // Floating-point products are not associative, so the two orders agree to
  // the last few ulps rather than bit for bit.
  for (int trial = 0; trial < 20; ++trial) {
    const double th = std::uniform_real_distribution<double>(-4, 4)(rng);
    const double a = std::uniform_real_distribution<double>(0.1, 5)(rng);
    const auto p = scale(rotate(x, th), a), q = rotate(scale(x, a), th);
    for (std::size_t k = 0; k < x.size(); ++k) EXPECT_LE(std::abs(p[k] - q[k]), 4e-15 * std::abs(p[k]) + 1e-300);
  }
  EXPECT_THROW(scale(x, 0.0), ParameterError);
}

TEST(Augment, AwgnMeasuredSnr) {
  const auto x = tone(6400, 3e6);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto y = channel_augment(x, Awgn{10.0, seed});
    double pn = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) pn += std::norm(y[k] - x[k]);
    pn /= static_cast<double>(x.size());
    EXPECT_NEAR(10.0 * std::log10(mean_power(x) / pn), 10.0, 0.3);
  }
}

TEST(Augment, AwgnHighSnrNearlyIdentity) {
  const auto x = noise(6400, 13);
  const auto y = channel_augment(x, Awgn{60.0, 1});
  double e = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) e += std::norm(y[k] - x[k]);
  EXPECT_LT(std::sqrt(e / x.size()) / std::sqrt(mean_power(x)), 0.002);
}

TEST(Augment, AwgnRejectsZeroSignal) {
  const ComplexSignal z(std::vector<double>(8, 0.0), SignalInfo{kFs});
  try {
    channel_augment(z, Awgn{10.0, 0});
    FAIL();
  } catch (const ParameterError& e) {
    EXPECT_NE(std::string(e.what()).find("cannot set SNR on zero signal"), std::string::npos);
  }
}

TEST(Augment, RicianLimitAndRayleighPower) {
  std::mt19937_64 rng(1);
  EXPECT_EQ(draw_rician_gain(std::numeric_limits<double>::infinity(), rng), cplx(1.0, 0.0));
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) worst = std::max(worst, std::abs(std::abs(draw_rician_gain(1e8, rng)) - 1.0));
  EXPECT_LT(worst, 1e-3);
  double p = 0.0;
  for (int k = 0; k < 100000; ++k) p += std::norm(draw_rician_gain(0.0, rng));
  EXPECT_NEAR(p / 100000, 1.0, 0.02);
  EXPECT_THROW(draw_rician_gain(-1.0, rng), ParameterError);
}

TEST(Augment, FlatFadingIsOneGainPerWindow) {
  const auto x = noise(300, 14);
  const auto y = channel_augment(x, RayleighFlat{7});
  const cplx h = y[0] / x[0];
  for (std::size_t k = 0; k < x.size(); ++k) EXPECT_LT(std::abs(y[k] - h * x[k]), 1e-12);
  EXPECT_EQ(channel_augment(x, RicianFlat{3.0, 7}), channel_augment(x, RicianFlat{3.0, 7}));
}

// --- full preprocessing chain --------------------------------------------

TEST(Preprocess, ChainReturnsPhases) {
  PreprocessConfig cfg;
  cfg.baseband = KnownCenter{1e6};
  cfg.bandpass = BandpassConfig{25e3, 20e6, 3};
  cfg.decimation = 2;
  const auto out = preprocess(noise(6400, 15), cfg);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].size(), 3200u);
  EXPECT_DOUBLE_EQ(out[1].sample_rate_hz(), 50e6);
}

TEST(Preprocess, DefaultIsIdentity) {
  const auto x = noise(64, 16);
  const auto out = preprocess(x, PreprocessConfig{});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0], x);
}

TEST(Preprocess, ValidatesConfig) {
  PreprocessConfig cfg;
  cfg.bandpass = BandpassConfig{25e3, 60e6, 3};
  EXPECT_THROW(preprocess(noise(64, 1), cfg), ParameterError);
  cfg = {};
  cfg.decimation = 0;
  EXPECT_THROW(preprocess(noise(64, 1), cfg), ParameterError);
  cfg = {};
  cfg.baseband = KnownCenter{70e6};
  EXPECT_THROW(preprocess(noise(64, 1), cfg), ParameterError);
}
