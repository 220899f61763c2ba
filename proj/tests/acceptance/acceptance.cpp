// Acceptance runner. `iqprint_acceptance N` checks criterion N and prints one
// line "criterion N: PASS|FAIL - details"; without arguments it runs all of
// them. Exit status is 0 only when every requested criterion passes.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <complex>
#include <cstring>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>

#include "iqprint/cli/commands.hpp"
#include "iqprint/dsp/augment.hpp"
#include "iqprint/dsp/baseband.hpp"
#include "iqprint/dsp/butterworth.hpp"
#include "iqprint/dsp/decimate.hpp"
#include "iqprint/model/train.hpp"
#include "iqprint/nn/batch_norm.hpp"
#include "iqprint/nn/complex_ops.hpp"
#include "iqprint/nn/init.hpp"
#include "iqprint/nn/recurrent.hpp"
#include "iqprint/sigmf.hpp"
#include "iqprint/synth/oracle.hpp"
#include "support/grad_cases.hpp"
#include "support/stub_model.hpp"
#include "support/testing.hpp"

using namespace iqprint;
using iqprint::testing::random_tensor;
using Td = nn::Tensor<double>;
using cd = std::complex<double>;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream o;
  o.precision(prec);
  o << v;
  return o.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ComplexSignal noise_signal(std::size_t n, std::mt19937_64& rng, double fs = 100e6) {
  return ComplexSignal(iqprint::testing::normal_values(2 * n, rng), SignalInfo{fs});
}

double max_abs_diff(const ComplexSignal& a, const ComplexSignal& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.interleaved().size(); ++k)
    m = std::max(m, std::abs(a.interleaved()[k] - b.interleaved()[k]));
  return m;
}

// 1. Complex dense and convolution layers against direct complex arithmetic.
Verdict complex_layers() {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t b = 1 + rng() % 4, rows = 1 + rng() % 3, f = 1 + rng() % 12, o = 1 + rng() % 9;
    const auto x = random_tensor({b, 2, rows, f}, rng, false);
    const auto wa = random_tensor({o, f}, rng, false), wb = random_tensor({o, f}, rng, false);
    const auto bias = random_tensor({2, o}, rng, false);
    const auto y = nn::complex_linear(x, wa, wb, bias);
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t q = 0; q < o; ++q) {
          cd acc(bias[q], bias[o + q]);
          for (std::size_t k = 0; k < f; ++k)
            acc += cd(wa[q * f + k], wb[q * f + k]) *
                   cd(x[((i * 2) * rows + r) * f + k], x[((i * 2 + 1) * rows + r) * f + k]);
          worst = std::max({worst, std::abs(y[((i * 2) * rows + r) * o + q] - acc.real()),
                            std::abs(y[((i * 2 + 1) * rows + r) * o + q] - acc.imag())});
        }
  }
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t b = 1 + rng() % 3, cin = 1 + rng() % 3, cout = 1 + rng() % 4, k = 1 + rng() % 6;
    const std::size_t pad = rng() % 3, stride = 1 + rng() % 3, len = k + rng() % 16;
    const auto x = random_tensor({b, 2, cin, len}, rng, false);
    const auto wa = random_tensor({cout, cin, k}, rng, false), wb = random_tensor({cout, cin, k}, rng, false);
    const auto bias = random_tensor({2, cout}, rng, false);
    const auto y = nn::complex_conv1d(x, wa, wb, bias, stride, pad);
    const std::size_t lout = (len + 2 * pad - k) / stride + 1;
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t co = 0; co < cout; ++co)
        for (std::size_t t = 0; t < lout; ++t) {
          cd acc(bias[co], bias[cout + co]);
          for (std::size_t ci = 0; ci < cin; ++ci)
            for (std::size_t j = 0; j < k; ++j) {
              const long pos = static_cast<long>(t * stride + j) - static_cast<long>(pad);
              if (pos < 0 || pos >= static_cast<long>(len)) continue;
              acc += cd(wa[(co * cin + ci) * k + j], wb[(co * cin + ci) * k + j]) *
                     cd(x[((i * 2) * cin + ci) * len + pos], x[((i * 2 + 1) * cin + ci) * len + pos]);
            }
          worst = std::max({worst, std::abs(y[((i * 2) * cout + co) * lout + t] - acc.real()),
                            std::abs(y[((i * 2 + 1) * cout + co) * lout + t] - acc.imag())});
        }
  }
  return {worst < 1e-12, "200 shapes, max abs error " + fmt(worst, 3)};
}

// 2. Whitening: zero mean and covariance W V W with W = (V + eps I)^(-1/2).
Verdict whitening() {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> g;
  const std::size_t n = 256, c = 2;
  const double eps = 1e-5;
  double worst_mean = 0.0, worst_cov = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(n * 2 * c);
    const double a = 0.2 + 3.0 * std::abs(g(rng)), rho = std::tanh(g(rng)), off = 3.0 * g(rng);
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t k = 0; k < c; ++k) {
        const double u = g(rng), w = g(rng);
        v[(b * 2) * c + k] = a * u + off;
        v[(b * 2 + 1) * c + k] = rho * u + 0.5 * w - off;
      }
    const Td x({n, 2, c}, v);
    const auto xh = nn::complex_whiten(x, eps);
    for (std::size_t k = 0; k < c; ++k) {
      double mr = 0, mi = 0;
      for (std::size_t b = 0; b < n; ++b) {
        mr += x[(b * 2) * c + k] / n;
        mi += x[(b * 2 + 1) * c + k] / n;
      }
      Eigen::Matrix2d V = Eigen::Matrix2d::Zero(), H = Eigen::Matrix2d::Zero();
      Eigen::Vector2d hm = Eigen::Vector2d::Zero();
      for (std::size_t b = 0; b < n; ++b) {
        const Eigen::Vector2d d(x[(b * 2) * c + k] - mr, x[(b * 2 + 1) * c + k] - mi);
        const Eigen::Vector2d h(xh[(b * 2) * c + k], xh[(b * 2 + 1) * c + k]);
        V += d * d.transpose() / n;
        H += h * h.transpose() / n;
        hm += h / n;
      }
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(V + eps * Eigen::Matrix2d::Identity());
      const Eigen::Matrix2d W = es.operatorInverseSqrt();
      worst_mean = std::max(worst_mean, hm.cwiseAbs().maxCoeff());
      worst_cov = std::max(worst_cov, (H - W * V * W).cwiseAbs().maxCoeff());
    }
  }
  return {worst_mean < 1e-9 && worst_cov < 1e-9,
          "50 batches of 256, max |mean| " + fmt(worst_mean, 3) + ", max covariance error " + fmt(worst_cov, 3)};
}

// 3. Rayleigh-magnitude, uniform-phase initialisation.
Verdict initialisation() {
  nn::Rng rng(31);
  const std::size_t n = 100000, fan_in = 40, fan_out = 60;
  const double sigma = nn::rayleigh_sigma(fan_in, fan_out, nn::InitCriterion::glorot);
  const auto [re, im] = nn::complex_init<double>(n, fan_in, fan_out, nn::InitCriterion::glorot, rng);
  double var = 0;
  std::vector<double> ph(n);
  for (std::size_t k = 0; k < n; ++k) {
    var += (re[k] * re[k] + im[k] * im[k]) / n;
    ph[k] = std::atan2(im[k], re[k]);
  }
  std::sort(ph.begin(), ph.end());
  double ks = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double f = (ph[k] + std::numbers::pi) / (2 * std::numbers::pi);
    ks = std::max({ks, std::abs(f - static_cast<double>(k) / n), std::abs(f - static_cast<double>(k + 1) / n)});
  }
  const double target = 2.0 * sigma * sigma, rel = std::abs(var - target) / target;
  return {rel < 0.05 && ks < 0.01,
          "Var " + fmt(var) + " vs 2 sigma^2 " + fmt(target) + " (rel " + fmt(rel, 2) + "), phase KS " + fmt(ks, 3)};
}

// 4. Every differentiable op against central differences.
Verdict gradients() {
  bool ok = true;
  std::string detail;
  for (const auto& s : iqprint::testing::all_grad_sweeps(20)) {
    ok = ok && s.ok();
    detail += (detail.empty() ? "" : ", ") + s.name + " " + fmt(s.worst, 2);
  }
  return {ok, "20 shapes each; worst relative error: " + detail};
}

// 5. Default bandpass response.
Verdict bandpass() {
  const double fs = 100e6;
  const auto f = dsp::design_butterworth_bandpass(25e3, 20e6, 3, fs);
  const double lo = f.magnitude_db(25e3, fs), hi = f.magnitude_db(20e6, fs);
  const double dc = 20.0 * std::log10(std::max(std::abs(f.response(0.0, fs)), 1e-300));
  const bool ok = std::abs(lo + 3.01) <= 0.1 && std::abs(hi + 3.01) <= 0.1 && dc < -80.0;
  return {ok, "25 kHz " + fmt(lo) + " dB, 20 MHz " + fmt(hi) + " dB, DC " + fmt(dc) + " dB"};
}

// 6. Lossless round trips.
Verdict round_trips() {
  std::mt19937_64 rng(6);
  iqprint::testing::TempDir dir("iqprint-acc");
  std::vector<std::string> bad;

  const auto sig = noise_signal(4096, rng);
  sigmf::Meta meta;
  meta.sample_rate_hz = 100e6;
  const auto [mp, dp] = sigmf::pair_paths(dir / "rt");
  sigmf::write_capture(meta, {sig}, mp, dp);
  const auto rec = sigmf::read_capture(mp, dp);
  // cf32 stores floats; the source is float-representable after one write.
  std::vector<double> as_f32;
  for (double v : sig.interleaved()) as_f32.push_back(static_cast<float>(v));
  if (rec.signals.size() != 1 || rec.signals[0].interleaved().size() != as_f32.size() ||
      std::memcmp(rec.signals[0].interleaved().data(), as_f32.data(), as_f32.size() * sizeof(double)) != 0)
    bad.push_back("cf32");
  sigmf::write_capture(meta, rec.signals, mp, dp);
  const auto rec2 = sigmf::read_capture(mp, dp);
  const auto r1 = rec.signals[0].interleaved(), r2 = rec2.signals[0].interleaved();
  if (!std::equal(r1.begin(), r1.end(), r2.begin(), r2.end())) bad.push_back("cf32 rewrite");

  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t len = 1 + rng() % 400, s = 1 + rng() % len;
    const auto x = random_tensor({2, 2, len}, rng, false);
    const auto seq = nn::sequence(x, s);
    const std::size_t t = len / s;
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t p = 0; p < 2; ++p)
        for (std::size_t k = 0; k < t * s; ++k)
          if (seq[(i * 2 + p) * t * s + k] != x[(i * 2 + p) * len + k]) {
            bad.push_back("sequencer");
            trial = 20, i = 2, p = 2, k = t * s;
          }
  }

  for (int trial = 0; trial < 20 && (bad.empty() || bad.back() != "decimation"); ++trial) {
    const std::size_t m = 1 + rng() % 8, n = m + rng() % 500;
    const auto x = noise_signal(n, rng);
    const auto out = dsp::decimate(x, m, false);
    for (std::size_t k = 0; k < (n / m) * m; ++k)
      if (out[k % m][k / m] != x[k]) {
        bad.push_back("decimation");
        break;
      }
  }

  double shift_err = 0.0, rot_err = 0.0;
  std::uniform_real_distribution<double> fu(-49e6, 49e6), tu(-10.0, 10.0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = noise_signal(6400, rng);
    const double f = fu(rng), th = tu(rng);
    shift_err = std::max(shift_err, max_abs_diff(dsp::frequency_shift(dsp::frequency_shift(x, f), -f), x));
    rot_err = std::max(rot_err, max_abs_diff(dsp::rotate(dsp::rotate(x, th), -th), x));
  }
  if (shift_err >= 1e-9) bad.push_back("frequency shift");
  if (rot_err >= 1e-9) bad.push_back("rotation");

  std::string detail = "cf32 bit-exact, sequencer, decimation interleave; shift err " + fmt(shift_err, 2) +
                       ", rotate err " + fmt(rot_err, 2);
  if (!bad.empty()) {
    detail = "failed:";
    for (const auto& b : bad) detail += " " + b;
  }
  return {bad.empty(), detail};
}

// 7. Recurrent model size at the reference widths.
Verdict rdcn_size() {
  model::ModelSpec s;
  s.arch = model::Arch::rdcn;
  s.class_count = 100;
  s.input_len = 6400;
  s.rdcn.hidden = 1024;
  s.rdcn.sequencer_step = 100;
  s.rdcn.binding = model::RdcnBinding::full_window;
  const double full = static_cast<double>(model::parameter_count(s));
  s.input_len = 3200;
  s.rdcn.sequencer_step = 50;
  const double half = static_cast<double>(model::parameter_count(s));
  const double e1 = std::abs(full - 92.3e6) / 92.3e6, e2 = std::abs(half - 30e6) / 30e6;
  return {e1 <= 0.15 && e2 <= 0.15, "L=6400: " + fmt(full / 1e6) + "M (" + fmt(100 * e1, 2) + "% off 92.3M), L=3200: " +
                                         fmt(half / 1e6) + "M (" + fmt(100 * e2, 2) + "% off 30M)"};
}

// 8. Learning-rate schedule on a model whose validation score never moves.
Verdict schedule() {
  model::ModelSpec spec;
  spec.arch = model::Arch::ann;
  spec.class_count = 4;
  spec.input_len = 16;
  iqprint::testing::StubModel<double> m(spec);
  const auto ws = iqprint::testing::dc_offset_store(4, 4, 16, 0.5, 1);
  model::TrainConfig cfg;
  cfg.epochs = 100;
  cfg.batch_size = 4;
  const auto h = model::train(m, ws, ws, cfg);
  bool ok = h.epochs.size() == 40 && h.stop_reason == "lr below early-stop threshold";
  for (std::size_t e = 0; e < h.epochs.size(); ++e)
    ok = ok && std::abs(h.epochs[e].lr - cfg.lr * std::pow(cfg.factor, static_cast<double>(e / 10))) <= 1e-18;
  const double last = h.epochs.empty() ? 0.0 : h.epochs.back().lr;
  return {ok, std::to_string(h.epochs.size()) + " epochs, last lr " + fmt(last, 3) + ", stop: " + h.stop_reason};
}

// --- end-to-end training on the synthetic population ---------------------

constexpr std::uint64_t kDataSeed = 7;

struct Population {
  synth::SynthConfig cfg;
  LabeledDataset ds;
  model::WindowStore train, val, test;
};

Population make_population(const synth::ImpairmentSpread& spread) {
  Population p;
  p.cfg.seed = kDataSeed;
  p.cfg.spread = spread;
  p.ds = synth::generate_dataset(p.cfg);
  model::TrainConfig tc;
  cli::carve_validation(p.ds, tc.val_fraction, kDataSeed);
  const auto ws = cli::build_store(p.ds, RunConfig{}.preprocess);
  p.train = ws.subset(Split::train);
  p.val = ws.subset(Split::val);
  p.test = ws.subset(Split::test);
  return p;
}

// Data-aided nearest-centroid classifier: shows the classes are separable.
double oracle_accuracy(const Population& p) {
  std::vector<std::vector<double>> ftr, fte;
  std::vector<std::size_t> ltr, lte;
  for (const auto& w : p.ds.windows) {
    const std::size_t idx = std::stoul(w.transmission_id->substr(w.transmission_id->find('/') + 1));
    auto f = synth::impairment_features(w.signal.to_complex(), synth::ideal_window(p.cfg, w.label, idx),
                                        p.cfg.sample_rate_hz);
    (w.split == Split::test ? fte : ftr).push_back(std::move(f));
    (w.split == Split::test ? lte : ltr).push_back(w.label);
  }
  synth::NearestCentroid nc;
  nc.fit(ftr, ltr, p.cfg.device_count);
  double ok = 0;
  for (std::size_t n = 0; n < fte.size(); ++n) ok += nc.predict(fte[n]) == lte[n];
  return ok / static_cast<double>(fte.size());
}

model::ModelSpec desk_spec(model::Arch arch, const Population& p, std::size_t crop_parts) {
  model::ModelSpec s;
  s.arch = arch;
  s.class_count = p.ds.class_count;
  s.input_len = dsp::crop_length(p.train.len, crop_parts);
  s.rdcn.hidden = 64;
  s.rdcn.sequencer_step = 50;
  s.rdcn.binding = model::RdcnBinding::per_step;
  s.cdcn.conv_channels = 8;
  s.cdcn.dense = 64;
  s.cnn.channels = 8;
  s.cnn.dense = 64;
  return s;
}

struct RunResult {
  model::EvalReport report;
  std::size_t epochs = 0;
  double seconds = 0.0;
};

RunResult train_and_test(model::Arch arch, const Population& p, std::size_t crop_parts, std::size_t epochs) {
  const auto t0 = std::chrono::steady_clock::now();
  auto m = model::build_model<float>(desk_spec(arch, p, crop_parts), 11);
  model::TrainConfig tc;
  tc.epochs = epochs;
  tc.lr = 1e-3;
  tc.batch_size = 32;
  tc.seed = 11;
  model::TrainOptions opt;
  opt.crop_parts = crop_parts;
  opt.on_epoch = [arch](const model::EpochRecord& r) {
    std::cerr << "  " << model::to_string(arch) << " epoch " << r.epoch << " loss " << r.loss << " val " << r.val_top1
              << " lr " << r.lr << '\n';
  };
  RunResult r;
  r.epochs = model::train(*m, p.train, p.val, tc, opt).epochs.size();
  model::EvalOptions eo;
  eo.crop_parts = crop_parts;
  eo.crop_seed = 0x74657374u;
  r.report = model::evaluate(*m, p.test, eo);
  r.seconds = seconds_since(t0);
  return r;
}

std::string describe(const std::string& name, const RunResult& r) {
  return name + " top1 " + fmt(r.report.top1, 3) + " top5 " + fmt(r.report.top5, 3) + " (" +
         std::to_string(r.epochs) + " epochs, " + fmt(r.seconds, 3) + " s)";
}

// 9. Both complex models identify the ten devices from full windows.
Verdict full_window_identification() {
  const auto p = make_population(synth::SynthConfig{}.spread);
  const double oracle = oracle_accuracy(p);
  if (oracle < 0.99) return {false, "dataset not separable: oracle top1 " + fmt(oracle, 3)};
  const auto rdcn = train_and_test(model::Arch::rdcn, p, 1, 50);
  const auto cdcn = train_and_test(model::Arch::cdcn, p, 1, 20);
  const auto good = [](const RunResult& r) { return r.report.top1 >= 0.90 && r.report.top5 == 1.0; };
  return {good(rdcn) && good(cdcn),
          "oracle " + fmt(oracle, 3) + "; " + describe("rdcn", rdcn) + "; " + describe("cdcn", cdcn)};
}

// 10. Six-way crops: recurrent model holds up and beats the real CNN.
Verdict cropped_identification() {
  const auto p = make_population(synth::SynthConfig{}.spread);
  const auto rdcn = train_and_test(model::Arch::rdcn, p, 6, 50);
  const auto cnn = train_and_test(model::Arch::cnn, p, 6, 50);
  const double gap = rdcn.report.top1 - cnn.report.top1;
  return {rdcn.report.top1 >= 0.80 && gap >= 0.10,
          describe("rdcn", rdcn) + "; " + describe("cnn", cnn) + "; gap " + fmt(100 * gap, 3) + " points"};
}

// 11. Identical devices cannot be told apart.
Verdict zero_spread_chance() {
  const auto p = make_population(synth::ImpairmentSpread{});
  bool ok = true;
  std::string detail;
  for (auto arch : {model::Arch::cdcn, model::Arch::rdcn, model::Arch::ann, model::Arch::cnn}) {
    const auto r = train_and_test(arch, p, 1, 10);
    ok = ok && std::abs(r.report.top1 - 0.1) <= 0.05;
    detail += (detail.empty() ? "" : "; ") + describe(model::to_string(arch), r);
  }
  return {ok, detail};
}

const std::vector<std::function<Verdict()>> kCriteria = {
    complex_layers, whitening, initialisation, gradients,  bandpass, round_trips, rdcn_size, schedule,
    full_window_identification, cropped_identification, zero_spread_chance};

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::size_t> which;
  for (int i = 1; i < argc; ++i) {
    const long n = std::strtol(argv[i], nullptr, 10);
    if (n < 1 || n > static_cast<long>(kCriteria.size())) {
      std::cerr << "usage: iqprint_acceptance [1-" << kCriteria.size() << "]...\n";
      return 2;
    }
    which.push_back(static_cast<std::size_t>(n));
  }
  if (which.empty())
    for (std::size_t n = 1; n <= kCriteria.size(); ++n) which.push_back(n);

  bool all = true;
  for (std::size_t n : which) {
    Verdict v;
    try {
      v = kCriteria[n - 1]();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::cout << "criterion " << n << ": " << (v.pass ? "PASS" : "FAIL") << " - " << v.detail << std::endl;
    all = all && v.pass;
  }
  return all ? 0 : 1;
}
