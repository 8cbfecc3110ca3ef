#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "lap/model.hpp"
#include "lap/treebank.hpp"

namespace lap {

struct LabelCounts {
  size_t gold = 0;
  size_t predicted = 0;
  size_t matched = 0;
};

struct EvalReport {
  // Labeled constituency span scores, 0..100. Empty labels are excluded.
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // Attachment scores, 0..100. Punctuation words are excluded.
  double uas = 0.0;
  double las = 0.0;

  size_t gold_spans = 0;
  size_t predicted_spans = 0;
  size_t matched_spans = 0;
  size_t scored_words = 0;
  size_t correct_heads = 0;
  size_t correct_labeled = 0;

  std::map<size_t, LabelCounts> per_const_label;  // label id -> span counts
  std::map<size_t, LabelCounts> per_dep_label;    // label id -> arc counts
};

// Streaming metric computation: feed gold/predicted pairs one sentence at a
// time, then read the totals. Span matches use multiset intersection of
// (start, end, label); attachment scores skip words whose POS tag is in the
// punctuation set.
class MetricsAccumulator {
 public:
  explicit MetricsAccumulator(std::set<std::string> punct_tags);

  void add(const Sentence& sentence, const ParseTree& gold_tree, const ParseTree& pred_tree,
           const DepArcs& gold_deps, const DepArcs& pred_deps);

  EvalReport report() const;

 private:
  std::set<std::string> punct_tags_;
  EvalReport totals_;
};

// Parses every sentence in the treebank with the model and scores the result.
EvalReport evaluate(ParserModel& model, const Treebank& bank,
                    const std::set<std::string>& punct_tags);

void write_report_json(std::ostream& out, const EvalReport& report, const Vocab& vocab);

}  // namespace lap
