#pragma once

#include <algorithm>
#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "iqprint/error.hpp"

namespace iqprint {

using cplx = std::complex<double>;

// Capture metadata carried alongside the samples.
struct SignalInfo {
  double sample_rate_hz = 0.0;
  std::optional<double> center_freq_hz;
  std::optional<std::string> capture_time;  // ISO-8601, as found in the capture
  std::optional<std::string> source_id;

  bool operator==(const SignalInfo&) const = default;
};

/// A non-empty run of complex baseband samples.
///
/// Samples are stored interleaved (i0, q0, i1, q1, ...), the same order as a
/// SigMF data file. Instances are immutable once built.
class ComplexSignal {
 public:
  ComplexSignal(std::vector<double> interleaved, SignalInfo info)
      : data_(std::move(interleaved)), info_(std::move(info)) {
    if (data_.empty()) throw ParameterError("signal must contain at least one sample");
    if (data_.size() % 2 != 0) throw ParameterError("interleaved I/Q buffer has odd length");
    if (!(info_.sample_rate_hz > 0.0))
      throw ParameterError("sample rate must be positive, got " + std::to_string(info_.sample_rate_hz));
  }

  static ComplexSignal from_complex(std::span<const cplx> samples, SignalInfo info) {
    std::vector<double> buf(samples.size() * 2);
    for (std::size_t k = 0; k < samples.size(); ++k) {
      buf[2 * k] = samples[k].real();
      buf[2 * k + 1] = samples[k].imag();
    }
    return ComplexSignal(std::move(buf), std::move(info));
  }

  std::size_t size() const { return data_.size() / 2; }
  double i(std::size_t k) const { return data_[2 * k]; }
  double q(std::size_t k) const { return data_[2 * k + 1]; }
  cplx operator[](std::size_t k) const { return {data_[2 * k], data_[2 * k + 1]}; }

  std::span<const double> interleaved() const { return data_; }
  std::vector<cplx> to_complex() const {
    std::vector<cplx> out(size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = (*this)[k];
    return out;
  }

  const SignalInfo& info() const { return info_; }
  double sample_rate_hz() const { return info_.sample_rate_hz; }
  double duration_s() const { return static_cast<double>(size()) / info_.sample_rate_hz; }

  // Same metadata, new samples.
  ComplexSignal with_samples(std::vector<double> interleaved) const {
    return ComplexSignal(std::move(interleaved), info_);
  }
  ComplexSignal with_info(SignalInfo info) const { return ComplexSignal(data_, std::move(info)); }

  // Samples [first, first + count) with the same metadata.
  ComplexSignal slice(std::size_t first, std::size_t count) const {
    if (count == 0 || first + count > size())
      throw ParameterError("slice [" + std::to_string(first) + ", " + std::to_string(first + count) +
                           ") outside signal of " + std::to_string(size()) + " samples");
    return ComplexSignal(std::vector<double>(data_.begin() + 2 * first, data_.begin() + 2 * (first + count)),
                         info_);
  }

  bool operator==(const ComplexSignal&) const = default;

 private:
  std::vector<double> data_;
  SignalInfo info_;
};

enum class Split : std::uint8_t { train, val, test };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

inline Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw FormatError("unknown split '" + s + "'");
}

struct LabeledWindow {
  ComplexSignal signal;
  std::size_t label = 0;
  Split split = Split::train;
  // Identifies the transmission the window was cut from, when known.
  std::optional<std::string> transmission_id;
};

struct LabeledDataset {
  std::vector<LabeledWindow> windows;
  std::size_t class_count = 0;
  std::vector<std::string> class_names;

  std::size_t window_len() const { return windows.empty() ? 0 : windows.front().signal.size(); }

  std::vector<std::size_t> indices(Split s) const {
    std::vector<std::size_t> idx;
    for (std::size_t n = 0; n < windows.size(); ++n)
      if (windows[n].split == s) idx.push_back(n);
    return idx;
  }

  std::size_t count(Split s) const { return indices(s).size(); }

  // Throws on the first violated dataset invariant.
  void validate() const {
    if (class_count < 1) throw ParameterError("dataset has no classes");
    if (!class_names.empty() && class_names.size() != class_count)
      throw ParameterError("class_names has " + std::to_string(class_names.size()) + " entries for " +
                           std::to_string(class_count) + " classes");
    if (windows.empty()) throw ParameterError("dataset has no windows");
    const auto len = windows.front().signal.size();
    const auto rate = windows.front().signal.sample_rate_hz();
    std::vector<bool> in_train(class_count, false);
    std::map<std::string, Split> transmission_split;
    for (const auto& w : windows) {
      if (w.signal.size() != len)
        throw ShapeError("window length " + std::to_string(w.signal.size()) + " differs from " + std::to_string(len));
      if (w.signal.sample_rate_hz() != rate) throw ParameterError("windows disagree on sample rate");
      if (w.label >= class_count)
        throw ParameterError("label " + std::to_string(w.label) + " out of range for " +
                             std::to_string(class_count) + " classes");
      if (w.split == Split::train) in_train[w.label] = true;
      if (w.transmission_id && w.split != Split::val) {
        auto [it, fresh] = transmission_split.emplace(*w.transmission_id, w.split);
        if (!fresh && it->second != w.split)
          throw ParameterError("transmission '" + *w.transmission_id + "' appears in both train and test");
      }
    }
    for (std::size_t c = 0; c < class_count; ++c)
      if (!in_train[c]) throw ParameterError("class " + class_name(c) + " has no training windows");
  }

  std::string class_name(std::size_t c) const {
    return c < class_names.size() ? class_names[c] : std::to_string(c);
  }
};

/// Cuts `signal` into windows of `window_len` samples every `stride` samples.
inline std::vector<ComplexSignal> window_signal(const ComplexSignal& signal, std::size_t window_len,
                                                std::size_t stride) {
  if (window_len < 1) throw ParameterError("window_len must be >= 1");
  if (stride < 1) throw ParameterError("stride must be >= 1");
  if (signal.size() < window_len)
    throw ParameterError("insufficient samples: signal has " + std::to_string(signal.size()) +
                         ", window needs " + std::to_string(window_len));
  const std::size_t count = (signal.size() - window_len) / stride + 1;
  std::vector<ComplexSignal> out;
  out.reserve(count);
  for (std::size_t w = 0; w < count; ++w) out.push_back(signal.slice(w * stride, window_len));
  return out;
}

struct SplitFractions {
  double train = 1.0;
  double val = 0.0;
  double test = 0.0;
};

namespace detail {

// Largest-remainder apportionment of n items over the three fractions; every
// split with a non-zero fraction receives at least one item.
inline std::array<std::size_t, 3> apportion(std::size_t n, const std::array<double, 3>& f) {
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (int s = 0; s < 3; ++s) {
    const double exact = f[s] * static_cast<double>(n);
    counts[s] = static_cast<std::size_t>(exact);
    rem[s] = exact - static_cast<double>(counts[s]);
    assigned += counts[s];
  }
  while (assigned < n) {
    int best = 0;
    for (int s = 1; s < 3; ++s)
      if (rem[s] > rem[best]) best = s;
    ++counts[best];
    rem[best] = -1.0;
    ++assigned;
  }
  for (int s = 0; s < 3; ++s) {
    if (f[s] > 0.0 && counts[s] == 0) {
      int donor = 0;
      for (int d = 1; d < 3; ++d)
        if (counts[d] > counts[donor]) donor = d;
      --counts[donor];
      ++counts[s];
    }
  }
  return counts;
}

}  // namespace detail

/// Reassigns every window's split so each class honours `fractions` to within
/// one window. Deterministic for a given seed.
inline LabeledDataset stratified_split(LabeledDataset dataset, SplitFractions fractions, std::uint64_t seed) {
  const std::array<double, 3> f{fractions.train, fractions.val, fractions.test};
  for (double v : f)
    if (v < 0.0) throw ParameterError("split fractions must be non-negative");
  if (std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9) throw ParameterError("split fractions must sum to 1");
  const auto needed = static_cast<std::size_t>(std::count_if(f.begin(), f.end(), [](double v) { return v > 0.0; }));

  std::vector<std::vector<std::size_t>> per_class(dataset.class_count);
  for (std::size_t n = 0; n < dataset.windows.size(); ++n) {
    const auto label = dataset.windows[n].label;
    if (label >= dataset.class_count) throw ParameterError("label out of range in stratified_split");
    per_class[label].push_back(n);
  }

  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x5eed5u};
  std::mt19937_64 rng(seq);
  constexpr std::array<Split, 3> order{Split::train, Split::val, Split::test};
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    auto& idx = per_class[c];
    if (idx.size() < needed)
      throw ParameterError("class too small: class " + dataset.class_name(c) + " has " +
                           std::to_string(idx.size()) + " windows for " + std::to_string(needed) + " splits");
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto counts = detail::apportion(idx.size(), f);
    std::size_t pos = 0;
    for (int s = 0; s < 3; ++s)
      for (std::size_t k = 0; k < counts[s]; ++k) dataset.windows[idx[pos++]].split = order[s];
  }
  return dataset;
}

}  // namespace iqprint
