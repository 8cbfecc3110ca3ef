#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "lap/model.hpp"

namespace lap {

struct TrainConfig {
  size_t epochs = 50;
  size_t batch_size = 8;
  double learning_rate = 1e-3;
  std::string optimizer = "adam";  // "adam" or "sgd"
  uint64_t seed = 0;
  ModelConfig model;
  std::vector<std::string> punct_tags = {"PUNCT"};
  std::string checkpoint;  // default output path; the train CLI can override
  size_t eval_every = 0;   // epochs between train-set evaluations; 0 disables
  double stop_f1 = 100.0;  // early-stop thresholds, checked when eval_every > 0
  double stop_uas = 100.0;
  double stop_las = 100.0;

  void validate() const;
};

// JSON (de)serialization. Parsing rejects unknown keys and ill-typed values;
// absent keys keep their defaults.
TrainConfig parse_train_config(std::istream& in, const std::string& source);
TrainConfig load_train_config(const std::string& path);
std::string train_config_json(const TrainConfig& config);

}  // namespace lap
