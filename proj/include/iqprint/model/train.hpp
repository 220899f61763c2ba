#pragma once

// Training loop with plateau annealing and early stopping, and evaluation.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "iqprint/dsp/crop.hpp"
#include "iqprint/model/data.hpp"
#include "iqprint/model/model.hpp"
#include "iqprint/model/optim.hpp"
#include "iqprint/nn/loss.hpp"

namespace iqprint::model {

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  OptimizerKind optimizer = OptimizerKind::adam;
  bool amsgrad = false;
  double lr = 1e-4;
  double weight_decay = 9e-5;
  std::size_t patience = 10;
  double factor = 0.1;
  double early_stop_lr = 1e-7;
  nn::LossKind loss = nn::LossKind::bce;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;

  bool operator==(const TrainConfig&) const = default;

  void validate() const {
    if (epochs < 1) throw ParameterError("train: epochs must be >= 1");
    if (batch_size < 1) throw ParameterError("train: batch_size must be >= 1");
    if (!(lr > 0.0)) throw ParameterError("train: lr must be > 0");
    if (weight_decay < 0.0) throw ParameterError("train: weight_decay must be >= 0");
    if (patience < 1) throw ParameterError("train: patience must be >= 1");
    if (!(factor > 0.0 && factor < 1.0)) throw ParameterError("train: factor must be in (0, 1)");
    if (!(early_stop_lr > 0.0)) throw ParameterError("train: early_stop_lr must be > 0");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ParameterError("train: val_fraction must be in [0, 1)");
  }
};

/// Plateau schedule: after `patience` consecutive epochs without a strictly
/// better validation score the rate is multiplied by `factor`.
struct LrSchedule {
  double lr;
  double factor;
  std::size_t patience;
  double stop_lr;
  double best = -std::numeric_limits<double>::infinity();
  std::size_t bad_epochs = 0;

  LrSchedule(double lr_, double factor_, std::size_t patience_, double stop_lr_)
      : lr(lr_), factor(factor_), patience(patience_), stop_lr(stop_lr_) {}

  /// Records a validation score; returns true if it is a new best.
  bool observe(double score) {
    if (score > best) {
      best = score;
      bad_epochs = 0;
      return true;
    }
    if (++bad_epochs >= patience) {
      lr *= factor;
      bad_epochs = 0;
    }
    return false;
  }

  // Relative slack so that 1e-4 * 0.1^3 counts as reaching 1e-7, not below it.
  bool should_stop() const { return lr < stop_lr * (1.0 - 1e-9); }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double val_top1 = 0.0;
  double lr = 0.0;  // rate used during this epoch
  bool improved = false;
};

struct TrainHistory {
  double baseline_val_top1 = 0.0;
  std::vector<EpochRecord> epochs;
  double best_val_top1 = 0.0;
  std::size_t best_epoch = 0;  // 0 = initial weights
  std::string stop_reason;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["baseline_val_top1"] = baseline_val_top1;
    j["best_val_top1"] = best_val_top1;
    j["best_epoch"] = best_epoch;
    j["stop_reason"] = stop_reason;
    j["epochs"] = nlohmann::json::array();
    for (const auto& e : epochs)
      j["epochs"].push_back(
          {{"epoch", e.epoch}, {"loss", e.loss}, {"val_top1", e.val_top1}, {"lr", e.lr}, {"improved", e.improved}});
    return j;
  }
};

struct PhaseTimes {
  double load = 0.0, preprocess = 0.0, infer = 0.0;
};

struct EvalReport {
  double top1 = 0.0, top5 = 0.0;
  std::size_t count = 0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  std::vector<std::string> class_names;
  PhaseTimes seconds;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["top1"] = top1;
    j["top5"] = top5;
    j["count"] = count;
    j["class_names"] = class_names;
    j["confusion"] = confusion;
    j["seconds"] = {{"load", seconds.load}, {"preprocess", seconds.preprocess}, {"infer", seconds.infer}};
    return j;
  }

  std::string table() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    os << "windows  " << count << "\ntop-1    " << top1 << "\ntop-5    " << top5 << "\n";
    os << "load     " << seconds.load << " s\npreproc  " << seconds.preprocess << " s\ninfer    " << seconds.infer
       << " s\n\nconfusion (rows true, columns predicted)\n";
    for (std::size_t r = 0; r < confusion.size(); ++r) {
      os << std::setw(12) << (r < class_names.size() ? class_names[r] : std::to_string(r));
      for (auto v : confusion[r]) os << std::setw(5) << v;
      os << '\n';
    }
    return os.str();
  }
};

struct EvalOptions {
  std::size_t crop_parts = 1;
  std::uint64_t crop_seed = 0;
  std::size_t batch_size = 64;
  std::size_t threads = 1;
};

/// Indices of `logits` row sorted by descending score (ties by class index).
inline std::vector<std::size_t> rank_classes(const float* row, std::size_t classes) {
  std::vector<std::size_t> order(classes);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [row](std::size_t a, std::size_t b) { return row[a] > row[b]; });
  return order;
}

/// Logits for every window in `ws`, in order, with a fresh zero context per
/// window. Runs `threads` workers over contiguous chunks.
template <typename T>
std::vector<float> infer_logits(Model<T>& model, const WindowStore& ws, std::size_t batch_size, std::size_t threads) {
  const std::size_t n = ws.size(), c = model.spec().class_count;
  std::vector<float> out(n * c);
  threads = std::max<std::size_t>(1, std::min(threads, n));
  auto work = [&](std::size_t lo, std::size_t hi) {
    nn::NoGradGuard guard;
    for (std::size_t s = lo; s < hi; s += batch_size) {
      std::vector<std::size_t> idx(std::min(batch_size, hi - s));
      std::iota(idx.begin(), idx.end(), s);
      const auto logits = model.forward(ws.batch<T>(idx), false, nullptr);
      for (std::size_t k = 0; k < idx.size() * c; ++k) out[s * c + k] = static_cast<float>(logits[k]);
    }
  };
  if (threads == 1) {
    work(0, n);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      const std::size_t lo = t * chunk, hi = std::min(n, lo + chunk);
      if (lo < hi) pool.emplace_back(work, lo, hi);
    }
    for (auto& th : pool) th.join();
  }
  return out;
}

inline EvalReport score_logits(const std::vector<float>& logits, const std::vector<std::size_t>& labels,
                               std::size_t classes) {
  EvalReport r;
  r.count = labels.size();
  r.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  const std::size_t k5 = std::min<std::size_t>(5, classes);
  std::size_t hit1 = 0, hit5 = 0;
  for (std::size_t n = 0; n < labels.size(); ++n) {
    const auto order = rank_classes(logits.data() + n * classes, classes);
    ++r.confusion.at(labels[n]).at(order[0]);
    if (order[0] == labels[n]) ++hit1;
    if (std::find(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k5), labels[n]) !=
        order.begin() + static_cast<std::ptrdiff_t>(k5))
      ++hit5;
  }
  if (r.count) {
    r.top1 = static_cast<double>(hit1) / static_cast<double>(r.count);
    r.top5 = static_cast<double>(hit5) / static_cast<double>(r.count);
  }
  return r;
}

template <typename T>
EvalReport evaluate(Model<T>& model, const WindowStore& ws, const EvalOptions& opt = {}) {
  if (ws.size() == 0) throw ParameterError("evaluate: empty test split");
  using clock = std::chrono::steady_clock;
  EvalReport r;
  auto t0 = clock::now();
  const WindowStore* input = &ws;
  WindowStore cropped;
  if (opt.crop_parts > 1) {
    dsp::CropScheduler sched(opt.crop_parts, opt.crop_seed);
    cropped = ws.cropped(sched);
    input = &cropped;
  }
  auto t1 = clock::now();
  const auto logits = infer_logits(model, *input, opt.batch_size, opt.threads);
  auto t2 = clock::now();
  r = score_logits(logits, input->labels, model.spec().class_count);
  r.class_names = ws.class_names;
  r.seconds.preprocess = std::chrono::duration<double>(t1 - t0).count();
  r.seconds.infer = std::chrono::duration<double>(t2 - t1).count();
  return r;
}

template <typename T>
std::vector<std::vector<T>> snapshot(const Model<T>& m) {
  std::vector<std::vector<T>> s;
  for (const auto& e : m.state()) s.emplace_back(e.tensor.values().begin(), e.tensor.values().end());
  return s;
}

template <typename T>
void restore(Model<T>& m, const std::vector<std::vector<T>>& s) {
  auto& st = m.state();
  for (std::size_t k = 0; k < st.size(); ++k) std::copy(s[k].begin(), s[k].end(), st[k].tensor.mutable_values().begin());
}

struct TrainOptions {
  std::size_t crop_parts = 1;
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Trains on `train`, selecting by validation top-1 on `val`. The model ends
/// holding the best weights seen, including the initial ones (epoch 0), which
/// also seed the improvement baseline.
template <typename T>
TrainHistory train(Model<T>& model, const WindowStore& train_set, const WindowStore& val_set, const TrainConfig& cfg,
                   const TrainOptions& opt = {}) {
  cfg.validate();
  if (train_set.size() == 0) throw ParameterError("train: empty train split");
  if (val_set.size() == 0) throw ParameterError("train: empty validation split");

  const EvalOptions val_opt{opt.crop_parts, cfg.seed ^ 0x76616cu, 64, 1};
  Optimizer<T> optim(model.parameters(), cfg.optimizer, cfg.weight_decay, cfg.amsgrad);
  LrSchedule sched(cfg.lr, cfg.factor, cfg.patience, cfg.early_stop_lr);
  dsp::CropScheduler crops(opt.crop_parts, cfg.seed ^ 0x63726f70u);
  RecurrentContext<T> ctx;
  std::mt19937_64 order_rng(cfg.seed ^ 0x6f72646572u);

  TrainHistory h;
  h.baseline_val_top1 = evaluate(model, val_set, val_opt).top1;
  sched.observe(h.baseline_val_top1);
  h.best_val_top1 = h.baseline_val_top1;
  auto best = snapshot(model);

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    ctx.reset();
    const WindowStore epoch_set = opt.crop_parts > 1 ? train_set.cropped(crops) : WindowStore{};
    const WindowStore& src = opt.crop_parts > 1 ? epoch_set : train_set;
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t s = 0; s < order.size(); s += cfg.batch_size) {
      const std::size_t nb = std::min(cfg.batch_size, order.size() - s);
      if (nb < 2 && s > 0) break;  // batch statistics need two windows
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(s),
                                   order.begin() + static_cast<std::ptrdiff_t>(s + nb));
      auto logits = model.forward(src.batch<T>(idx), true, &ctx);
      auto loss = nn::loss(logits, src.batch_labels(idx), cfg.loss);
      const double lv = static_cast<double>(loss.item());
      if (!std::isfinite(lv))
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(s / cfg.batch_size));
      nn::backward(loss);
      optim.step(sched.lr);
      optim.zero_grad();
      loss_sum += lv * static_cast<double>(nb);
      seen += nb;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
    rec.lr = sched.lr;
    rec.val_top1 = evaluate(model, val_set, val_opt).top1;
    rec.improved = sched.observe(rec.val_top1);
    if (rec.improved) {
      h.best_val_top1 = rec.val_top1;
      h.best_epoch = epoch;
      best = snapshot(model);
    }
    h.epochs.push_back(rec);
    if (opt.on_epoch) opt.on_epoch(rec);
    if (sched.should_stop()) {
      h.stop_reason = "lr below early-stop threshold";
      break;
    }
  }
  if (h.stop_reason.empty()) h.stop_reason = "epoch limit";
  restore(model, best);
  return h;
}

}  // namespace iqprint::model
