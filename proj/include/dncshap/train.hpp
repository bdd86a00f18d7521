#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "dncshap/error.hpp"
#include "dncshap/layers.hpp"
#include "dncshap/loss.hpp"
#include "dncshap/rng.hpp"
#include "dncshap/tensor.hpp"

namespace dncshap {

struct Sample {
  Tensor image;   // (s,s,3) in [0,1]
  Tensor speech;  // (s,s,1) in [0,1]
  int label = 0;
};

struct TrainConfig {
  int epochs = 30;
  int batch_size = 64;
  double lr = 8e-6;  // full-scale default; toy runs should raise it
  double train_split = 0.7;
  int early_stop_patience = 5;
  int plateau_patience = 2;
  double plateau_factor = 0.5;
  double bn_momentum = 0.1;
  LossConfig loss;
  std::uint64_t seed = 0;
};

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> history;
  bool stopped_early = false;
  double final_lr = 0.0;
};

namespace detail {

inline int argmax_index(const std::vector<double>& v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = static_cast<int>(i);
  }
  return best;
}

// Adam over a flat list of parameter tensors.
struct Adam {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long long step_count = 0;
  std::vector<Tensor> m, v;

  template <typename Params>
  void init(const Params& params) {
    m.clear();
    v.clear();
    for (const ParamRef& p : params) {
      m.push_back(Tensor::zeros_like(*p.value));
      v.push_back(Tensor::zeros_like(*p.value));
    }
  }

  template <typename Params>
  void step(Params& params, double lr) {
    ++step_count;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor& val = *params[i].value;
      const Tensor& grad = *params[i].grad;
      for (std::size_t j = 0; j < val.data.size(); ++j) {
        const double g = grad.data[j];
        m[i].data[j] = beta1 * m[i].data[j] + (1.0 - beta1) * g;
        v[i].data[j] = beta2 * v[i].data[j] + (1.0 - beta2) * g * g;
        const double mhat = m[i].data[j] / c1;
        const double vhat = v[i].data[j] / c2;
        val.data[j] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }
};

}  // namespace detail

// Mean loss/accuracy of the pure forward pass over a sample set.
template <typename Model>
std::pair<double, double> evaluate(const Model& model, const std::vector<Sample>& samples,
                                   const std::vector<std::size_t>& indices, const LossConfig& loss_cfg) {
  if (indices.empty()) return {0.0, 0.0};
  double loss = 0.0;
  long long hits = 0;
  for (std::size_t idx : indices) {
    const Sample& s = samples[idx];
    const std::vector<double> probs = model.forward(s.image, s.speech);
    std::vector<double> target(probs.size(), 0.0);
    target[static_cast<std::size_t>(s.label)] = 1.0;
    loss += combined_loss(probs, target, loss_cfg);
    if (detail::argmax_index(probs) == s.label) ++hits;
  }
  return {loss / static_cast<double>(indices.size()),
          static_cast<double>(hits) / static_cast<double>(indices.size())};
}

template <typename Model>
std::pair<double, double> evaluate(const Model& model, const std::vector<Sample>& samples,
                                   const LossConfig& loss_cfg = {}) {
  std::vector<std::size_t> idx(samples.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return evaluate(model, samples, idx, loss_cfg);
}

// Minibatch Adam with early stopping and plateau LR halving, both driven by
// validation loss (train loss when the validation slice is empty). Training
// is a pure function of (model weights, dataset, config): one seed fixes the
// split, the shuffles and hence every final weight bit.
template <typename Model>
TrainResult train_toy(Model& model, const std::vector<Sample>& dataset, const TrainConfig& cfg) {
  if (dataset.empty()) throw UserError("train: dataset is empty");
  if (cfg.batch_size < 1) throw UserError("train: batch_size must be positive");
  if (!(cfg.train_split > 0.0 && cfg.train_split <= 1.0)) throw UserError("train: train_split must be in (0,1]");

  TrainResult result;
  result.final_lr = cfg.lr;
  if (cfg.epochs <= 0) return result;  // degenerate config: untrained model, empty history

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::size_t n_train = static_cast<std::size_t>(cfg.train_split * static_cast<double>(dataset.size()));
  if (n_train == 0) n_train = 1;
  std::vector<std::size_t> train_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> val_idx(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());

  auto params = model.params();
  detail::Adam adam;
  adam.init(params);

  double lr = cfg.lr;
  double best_val = 1e308;
  int no_improve_stop = 0;
  int no_improve_lr = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(train_idx);
    double epoch_loss = 0.0;
    long long epoch_hits = 0;

    try {
      for (std::size_t begin = 0; begin < train_idx.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
        const std::size_t end = std::min(begin + static_cast<std::size_t>(cfg.batch_size), train_idx.size());
        const double inv_batch = 1.0 / static_cast<double>(end - begin);
        model.zero_grads();
        for (std::size_t i = begin; i < end; ++i) {
          const Sample& s = dataset[train_idx[i]];
          typename Model::Cache cache;
          const std::vector<double> probs = model.forward_train(s.image, s.speech, cache);
          std::vector<double> target(probs.size(), 0.0);
          target[static_cast<std::size_t>(s.label)] = 1.0;
          const double sample_loss = combined_loss(probs, target, cfg.loss);
          if (!std::isfinite(sample_loss)) throw DivergenceError("loss is not finite");
          epoch_loss += sample_loss;
          if (detail::argmax_index(probs) == s.label) ++epoch_hits;
          std::vector<double> dyhat = combined_loss_grad(probs, s.label, cfg.loss);
          for (double& g : dyhat) g *= inv_batch;
          model.backward(cache, dyhat);
          model.accumulate_bn_stats(cache);
        }
        adam.step(params, lr);
        model.apply_bn_updates(cfg.bn_momentum);
      }
    } catch (const NumericError& e) {
      throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
    } catch (const DivergenceError& e) {
      throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = epoch_loss / static_cast<double>(train_idx.size());
    stats.train_acc = static_cast<double>(epoch_hits) / static_cast<double>(train_idx.size());
    stats.lr = lr;
    if (!val_idx.empty()) {
      try {
        const auto [vl, va] = evaluate(model, dataset, val_idx, cfg.loss);
        stats.val_loss = vl;
        stats.val_acc = va;
      } catch (const NumericError& e) {
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      }
    } else {
      stats.val_loss = stats.train_loss;
      stats.val_acc = stats.train_acc;
    }
    if (!std::isfinite(stats.train_loss) || !std::isfinite(stats.val_loss)) {
      throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ": non-finite epoch loss");
    }
    result.history.push_back(stats);

    if (stats.val_loss < best_val) {
      best_val = stats.val_loss;
      no_improve_stop = 0;
      no_improve_lr = 0;
    } else {
      ++no_improve_stop;
      ++no_improve_lr;
      if (no_improve_lr >= cfg.plateau_patience) {
        lr *= cfg.plateau_factor;
        no_improve_lr = 0;
      }
      if (no_improve_stop >= cfg.early_stop_patience) {
        result.stopped_early = true;
        break;
      }
    }
  }
  result.final_lr = lr;
  return result;
}

inline void write_history_csv(const std::string& path, const std::vector<EpochStats>& history) {
  std::ofstream out(path);
  if (!out) throw FormatError(path + ": cannot open for writing");
  out << "epoch,train_loss,train_acc,val_loss,val_acc,lr\n";
  char buf[220];
  for (const EpochStats& e : history) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", e.epoch, e.train_loss, e.train_acc,
                  e.val_loss, e.val_acc, e.lr);
    out << buf;
  }
  if (!out) throw FormatError(path + ": write failed");
}

}  // namespace dncshap
