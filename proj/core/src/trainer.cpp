#include "lap/trainer.hpp"

#include <cmath>
#include <numeric>
#include <ostream>
#include <set>

#include "lap/errors.hpp"

namespace lap {

Optimizer::Optimizer(std::vector<NamedParam> params, const TrainConfig& config)
    : params_(std::move(params)),
      learning_rate_(config.learning_rate),
      adam_(config.optimizer == "adam") {
  if (adam_) {
    for (const NamedParam& p : params_) {
      m_.emplace_back(p.tensor.size(), 0.0);
      v_.emplace_back(p.tensor.size(), 0.0);
    }
  }
}

void Optimizer::step(size_t batch) {
  double scale = 1.0 / static_cast<double>(batch);
  ++steps_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (size_t pi = 0; pi < params_.size(); ++pi) {
    Tensor& t = params_[pi].tensor;
    std::vector<double>& w = t.values_mut();
    const std::vector<double>* grad = t.has_grad() ? &t.grad() : nullptr;
    for (size_t i = 0; i < w.size(); ++i) {
      double g = grad ? (*grad)[i] * scale : 0.0;
      if (adam_) {
        m_[pi][i] = beta1_ * m_[pi][i] + (1.0 - beta1_) * g;
        v_[pi][i] = beta2_ * v_[pi][i] + (1.0 - beta2_) * g * g;
        w[i] -= learning_rate_ * (m_[pi][i] / bc1) / (std::sqrt(v_[pi][i] / bc2) + eps_);
      } else {
        w[i] -= learning_rate_ * g;
      }
    }
    t.zero_grad();
  }
}

TrainResult train(ParserModel& model, const Treebank& bank, const TrainConfig& config,
                  std::ostream* log) {
  config.validate();
  if (bank.entries.empty()) throw InputError("train: treebank is empty");

  std::vector<NamedParam> params;
  model.collect(params);
  Optimizer optimizer(std::move(params), config);
  std::set<std::string> punct(config.punct_tags.begin(), config.punct_tags.end());
  Rng rng(config.seed);

  TrainResult result;
  std::vector<size_t> order(bank.entries.size());
  std::iota(order.begin(), order.end(), size_t{0});

  for (size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    size_t pending = 0;
    for (size_t idx : order) {
      Tensor loss = model.loss(bank.entries[idx], rng, true);
      double value = loss.item();
      if (!std::isfinite(value)) {
        throw DivergenceError("training diverged: loss " + std::to_string(value) + " at epoch " +
                              std::to_string(epoch) + " on sentence " + std::to_string(idx));
      }
      epoch_loss += value;
      backward(loss);
      if (++pending == config.batch_size) {
        optimizer.step(pending);
        pending = 0;
      }
    }
    if (pending > 0) optimizer.step(pending);

    EpochLog entry;
    entry.epoch = epoch;
    entry.mean_loss = epoch_loss / static_cast<double>(bank.entries.size());
    if (config.eval_every > 0 && epoch % config.eval_every == 0) {
      entry.evaluated = true;
      entry.report = evaluate(model, bank, punct);
    }
    if (log) {
      *log << "epoch " << epoch << "  loss " << entry.mean_loss;
      if (entry.evaluated) {
        *log << "  f1 " << entry.report.f1 << "  uas " << entry.report.uas << "  las "
             << entry.report.las;
      }
      *log << "\n";
    }
    result.epochs.push_back(entry);
    if (entry.evaluated && entry.report.f1 >= config.stop_f1 &&
        entry.report.uas >= config.stop_uas && entry.report.las >= config.stop_las) {
      result.stopped_early = epoch < config.epochs;
      break;
    }
  }
  return result;
}

}  // namespace lap
