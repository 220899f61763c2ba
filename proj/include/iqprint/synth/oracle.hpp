#pragma once

// Data-aided reference classifiers used to confirm that a synthetic device
// roster is separable at all. They see the ideal transmitted waveform, so
// they bound what a blind classifier could reach on the same draw.

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "iqprint/error.hpp"
#include "iqprint/signal.hpp"

namespace iqprint::synth {

/// CFO by linear regression of the unwrapped phase of r * conj(x), averaged
/// over blocks of `block` samples and weighted by block energy.
inline double estimate_cfo_phase_slope(const std::vector<cplx>& received, const std::vector<cplx>& ideal, double fs,
                                       std::size_t block = 64) {
  if (received.size() != ideal.size() || received.empty()) throw ShapeError("received/ideal length mismatch");
  std::vector<double> t, ph, wt;
  double energy_total = 0.0;
  for (const auto& v : ideal) energy_total += std::norm(v);
  const double floor = 0.05 * energy_total / static_cast<double>(ideal.size()) * static_cast<double>(block);
  double prev = 0.0;
  bool first = true;
  for (std::size_t start = 0; start + block <= received.size(); start += block) {
    cplx acc{};
    double e = 0.0;
    for (std::size_t k = start; k < start + block; ++k) {
      acc += received[k] * std::conj(ideal[k]);
      e += std::norm(ideal[k]);
    }
    if (e < floor || std::abs(acc) == 0.0) continue;
    double p = std::arg(acc);
    if (!first) {
      while (p - prev > std::numbers::pi) p -= 2.0 * std::numbers::pi;
      while (p - prev < -std::numbers::pi) p += 2.0 * std::numbers::pi;
    }
    first = false;
    prev = p;
    t.push_back(static_cast<double>(start) + 0.5 * static_cast<double>(block - 1));
    ph.push_back(p);
    wt.push_back(e);
  }
  if (t.size() < 2) throw ParameterError("not enough energetic blocks to estimate CFO");
  double sw = 0, st = 0, sp = 0;
  for (std::size_t n = 0; n < t.size(); ++n) {
    sw += wt[n];
    st += wt[n] * t[n];
    sp += wt[n] * ph[n];
  }
  const double tm = st / sw, pm = sp / sw;
  double num = 0, den = 0;
  for (std::size_t n = 0; n < t.size(); ++n) {
    num += wt[n] * (t[n] - tm) * (ph[n] - pm);
    den += wt[n] * (t[n] - tm) * (t[n] - tm);
  }
  return num / den * fs / (2.0 * std::numbers::pi);
}

/// Impairment feature vector: CFO estimate followed by the real and imaginary
/// parts of the least-squares widely-linear fit r' = a x + b conj(x) + d + e x|x|^2
/// on the CFO-corrected received samples.
inline std::vector<double> impairment_features(const std::vector<cplx>& received, const std::vector<cplx>& ideal,
                                               double fs) {
  const double cfo = estimate_cfo_phase_slope(received, ideal, fs);
  const std::size_t n = received.size();
  Eigen::MatrixXcd basis(static_cast<Eigen::Index>(n), 4);
  Eigen::VectorXcd target(static_cast<Eigen::Index>(n));
  const double w = -2.0 * std::numbers::pi * cfo / fs;
  for (std::size_t k = 0; k < n; ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    const cplx x = ideal[k];
    basis(r, 0) = x;
    basis(r, 1) = std::conj(x);
    basis(r, 2) = 1.0;
    basis(r, 3) = x * std::norm(x);
    target(r) = received[k] * std::polar(1.0, w * static_cast<double>(k));
  }
  const Eigen::VectorXcd coef = basis.colPivHouseholderQr().solve(target);
  std::vector<double> f{cfo};
  for (Eigen::Index c = 0; c < coef.size(); ++c) {
    f.push_back(coef(c).real());
    f.push_back(coef(c).imag());
  }
  return f;
}

/// Nearest class centroid after scaling each feature by its pooled
/// within-class standard deviation.
class NearestCentroid {
 public:
  void fit(const std::vector<std::vector<double>>& features, const std::vector<std::size_t>& labels,
           std::size_t class_count) {
    if (features.empty() || features.size() != labels.size()) throw ShapeError("features/labels mismatch");
    const std::size_t dim = features.front().size();
    centroids_.assign(class_count, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(class_count, 0);
    for (std::size_t n = 0; n < features.size(); ++n) {
      ++counts.at(labels[n]);
      for (std::size_t j = 0; j < dim; ++j) centroids_[labels[n]][j] += features[n][j];
    }
    for (std::size_t c = 0; c < class_count; ++c)
      for (auto& v : centroids_[c]) v /= static_cast<double>(std::max<std::size_t>(1, counts[c]));
    scale_.assign(dim, 0.0);
    for (std::size_t n = 0; n < features.size(); ++n)
      for (std::size_t j = 0; j < dim; ++j) {
        const double d = features[n][j] - centroids_[labels[n]][j];
        scale_[j] += d * d;
      }
    for (auto& s : scale_) s = std::sqrt(s / static_cast<double>(features.size())) + 1e-300;
  }

  std::size_t predict(const std::vector<double>& f) const {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids_.size(); ++c) {
      double d = 0.0;
      for (std::size_t j = 0; j < f.size(); ++j) {
        const double z = (f[j] - centroids_[c][j]) / scale_[j];
        d += z * z;
      }
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    return best;
  }

 private:
  std::vector<std::vector<double>> centroids_;
  std::vector<double> scale_;
};

}  // namespace iqprint::synth
