#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <vector>

#include "lap/model.hpp"

namespace lap {

enum class ContributionMode { l1_average, softmax };

const char* to_string(ContributionMode mode);

// Per-head share of one span vector. l1_average: L1 mass of the head's slice
// over the total (uniform when everything is zero). softmax: softmax over
// per-head mean absolute activation. Requires use_pfl=false: the shared
// feed-forward layer mixes the concatenated heads, after which slices no
// longer belong to single heads.
std::vector<double> head_contributions(const Tensor& span_vec, const LabelAttentionConfig& config,
                                       ContributionMode mode);

struct HeadTrace {
  static constexpr size_t kNoGold = static_cast<size_t>(-1);

  size_t start = 0;
  size_t end = 0;
  std::vector<double> contributions;           // simplex over heads
  std::vector<std::vector<double>> attention;  // per head, distribution over words
  size_t predicted_label = 0;
  size_t gold_label = kNoGold;
};

// Traces every labeled span of the predicted parse. With gold, gold_label is
// the gold label at the same span (empty-label id when gold lacks the span).
// Requires query_mode=vector (one attention row per head) and use_pfl=false.
std::vector<HeadTrace> attention_trace(const Sentence& sentence, ParserModel& model,
                                       const ParseTree* gold = nullptr,
                                       ContributionMode mode = ContributionMode::l1_average);

struct HeadStats {
  size_t num_heads = 0;
  std::map<size_t, size_t> span_count;                   // per predicted label
  std::map<size_t, std::vector<double>> top_head_freq;   // per predicted label, sums to 1
  std::map<size_t, std::vector<double>> mean_contribution;
  // Spans whose gold label differs from the prediction, grouped by gold label.
  std::map<size_t, size_t> confusion_count;
  std::map<size_t, std::vector<double>> confusion_top_head_freq;
};

HeadStats aggregate_stats(const std::vector<HeadTrace>& traces);

// One JSON object per line.
void write_traces_jsonl(std::ostream& out, const std::vector<HeadTrace>& traces,
                        const Vocab& vocab);

// Columns: label, head, frequency, mean_contribution.
void write_head_stats_csv(std::ostream& out, const HeadStats& stats, const Vocab& vocab);

// Columns: gold_label, head, frequency.
void write_confusion_csv(std::ostream& out, const HeadStats& stats, const Vocab& vocab);

}  // namespace lap
