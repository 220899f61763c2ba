#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <unordered_map>
#include <vector>

#include "iqprint/error.hpp"
#include "iqprint/signal.hpp"

namespace iqprint::dsp {

inline std::size_t crop_length(std::size_t signal_len, std::size_t parts) {
  if (parts < 1) throw ParameterError("crop parts must be >= 1");
  if (parts > signal_len)
    throw ParameterError("crop parts " + std::to_string(parts) + " exceed signal length " + std::to_string(signal_len));
  return signal_len / parts;
}

/// Serves crop part indices per signal without replacement. Each signal walks
/// its own shuffled permutation of {0..N-1}; once exhausted it is reshuffled.
class CropScheduler {
 public:
  CropScheduler(std::size_t parts, std::uint64_t seed) : parts_(parts), rng_(seed) {
    if (parts < 1) throw ParameterError("crop parts must be >= 1");
  }

  std::size_t parts() const { return parts_; }

  std::size_t next_part(std::size_t signal_id) {
    auto& st = state_[signal_id];
    if (st.pos == st.perm.size()) {
      st.perm.resize(parts_);
      std::iota(st.perm.begin(), st.perm.end(), std::size_t{0});
      std::shuffle(st.perm.begin(), st.perm.end(), rng_);
      st.pos = 0;
    }
    return st.perm[st.pos++];
  }

 private:
  struct PerSignal {
    std::vector<std::size_t> perm;
    std::size_t pos = 0;
  };
  std::size_t parts_;
  std::mt19937_64 rng_;
  std::unordered_map<std::size_t, PerSignal> state_;
};

// Part `part` of `parts` equal-length contiguous pieces (tail remainder unused).
inline ComplexSignal crop_part(const ComplexSignal& signal, std::size_t parts, std::size_t part) {
  const std::size_t len = crop_length(signal.size(), parts);
  if (part >= parts) throw ParameterError("crop part index out of range");
  return signal.slice(part * len, len);
}

inline ComplexSignal random_crop(const ComplexSignal& signal, std::size_t signal_id, CropScheduler& scheduler) {
  crop_length(signal.size(), scheduler.parts());
  return crop_part(signal, scheduler.parts(), scheduler.next_part(signal_id));
}

}  // namespace iqprint::dsp
