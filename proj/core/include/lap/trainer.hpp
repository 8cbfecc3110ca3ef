#pragma once

#include <iosfwd>
#include <vector>

#include "lap/config.hpp"
#include "lap/metrics.hpp"
#include "lap/model.hpp"
#include "lap/treebank.hpp"

namespace lap {

struct EpochLog {
  size_t epoch = 0;       // 1-based
  double mean_loss = 0.0;  // mean per-sentence loss over the epoch
  bool evaluated = false;
  EvalReport report;  // valid when evaluated
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  bool stopped_early = false;  // eval thresholds reached before the last epoch
};

// Gradient-descent step rule over a fixed parameter list.
class Optimizer {
 public:
  Optimizer(std::vector<NamedParam> params, const TrainConfig& config);

  // Applies one update from the accumulated gradients, scaled by 1/batch,
  // then clears them.
  void step(size_t batch);

 private:
  std::vector<NamedParam> params_;
  double learning_rate_;
  bool adam_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  size_t steps_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Minimizes the joint loss over the treebank: per-sentence forward/backward
// with gradient accumulation to the batch boundary, a fresh shuffle per
// epoch, and optional early stopping on train-set metrics. Logs one line per
// epoch to `log` when given. Throws DivergenceError on a non-finite loss.
TrainResult train(ParserModel& model, const Treebank& bank, const TrainConfig& config,
                  std::ostream* log = nullptr);

}  // namespace lap
