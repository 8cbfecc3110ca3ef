#include "lap/metrics.hpp"

#include <algorithm>
#include <ostream>

#include <json.hpp>

#include "lap/errors.hpp"

namespace lap {

namespace {

bool span_less(const LabeledSpan& a, const LabeledSpan& b) {
  if (a.start != b.start) return a.start < b.start;
  if (a.end != b.end) return a.end < b.end;
  return a.label < b.label;
}

std::vector<LabeledSpan> scored_spans(const ParseTree& tree) {
  std::vector<LabeledSpan> spans;
  for (const LabeledSpan& s : tree.labeled_spans()) {
    if (s.label != Vocab::kEmptyLabelId) spans.push_back(s);
  }
  std::sort(spans.begin(), spans.end(), span_less);
  return spans;
}

double ratio(size_t matched, size_t denom, size_t other_denom) {
  if (denom == 0) return other_denom == 0 ? 100.0 : 0.0;
  return 100.0 * static_cast<double>(matched) / static_cast<double>(denom);
}

}  // namespace

MetricsAccumulator::MetricsAccumulator(std::set<std::string> punct_tags)
    : punct_tags_(std::move(punct_tags)) {}

void MetricsAccumulator::add(const Sentence& sentence, const ParseTree& gold_tree,
                             const ParseTree& pred_tree, const DepArcs& gold_deps,
                             const DepArcs& pred_deps) {
  size_t n = sentence.size();
  if (gold_tree.length != n || pred_tree.length != n || gold_deps.size() != n ||
      pred_deps.size() != n) {
    throw InputError("metrics: sentence, trees, and arcs disagree on length");
  }

  std::vector<LabeledSpan> gold = scored_spans(gold_tree);
  std::vector<LabeledSpan> pred = scored_spans(pred_tree);
  totals_.gold_spans += gold.size();
  totals_.predicted_spans += pred.size();
  for (const LabeledSpan& s : gold) totals_.per_const_label[s.label].gold += 1;
  for (const LabeledSpan& s : pred) totals_.per_const_label[s.label].predicted += 1;

  size_t gi = 0, pi = 0;
  while (gi < gold.size() && pi < pred.size()) {
    if (gold[gi] == pred[pi]) {
      totals_.matched_spans += 1;
      totals_.per_const_label[gold[gi].label].matched += 1;
      ++gi;
      ++pi;
    } else if (span_less(gold[gi], pred[pi])) {
      ++gi;
    } else {
      ++pi;
    }
  }

  for (size_t i = 0; i < n; ++i) {
    if (punct_tags_.count(sentence.tokens[i].tag)) continue;
    totals_.scored_words += 1;
    LabelCounts& lc = totals_.per_dep_label[gold_deps.labels[i]];
    lc.gold += 1;
    totals_.per_dep_label[pred_deps.labels[i]].predicted += 1;
    if (gold_deps.heads[i] == pred_deps.heads[i]) {
      totals_.correct_heads += 1;
      if (gold_deps.labels[i] == pred_deps.labels[i]) {
        totals_.correct_labeled += 1;
        lc.matched += 1;
      }
    }
  }
}

EvalReport MetricsAccumulator::report() const {
  EvalReport r = totals_;
  r.precision = ratio(r.matched_spans, r.predicted_spans, r.gold_spans);
  r.recall = ratio(r.matched_spans, r.gold_spans, r.predicted_spans);
  r.f1 = r.precision + r.recall > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : (r.gold_spans == 0 && r.predicted_spans == 0 ? 100.0 : 0.0);
  r.uas = ratio(r.correct_heads, r.scored_words, r.scored_words);
  r.las = ratio(r.correct_labeled, r.scored_words, r.scored_words);
  return r;
}

EvalReport evaluate(ParserModel& model, const Treebank& bank,
                    const std::set<std::string>& punct_tags) {
  if (model.vocab.num_words() != bank.vocab.num_words() ||
      model.vocab.num_tags() != bank.vocab.num_tags() ||
      model.vocab.num_const_labels() != bank.vocab.num_const_labels() ||
      model.vocab.num_dep_labels() != bank.vocab.num_dep_labels()) {
    throw InputError("evaluate: model and treebank vocabularies differ");
  }
  MetricsAccumulator acc(punct_tags);
  for (const TreebankEntry& e : bank.entries) {
    ParserModel::Prediction pred = model.predict(e.sentence);
    acc.add(e.sentence, e.tree, pred.tree, e.deps, pred.deps);
  }
  return acc.report();
}

void write_report_json(std::ostream& out, const EvalReport& report, const Vocab& vocab) {
  nlohmann::json per_const = nlohmann::json::object();
  for (const auto& [label, counts] : report.per_const_label) {
    per_const[vocab.const_label(label)] = {
        {"gold", counts.gold}, {"predicted", counts.predicted}, {"matched", counts.matched}};
  }
  nlohmann::json per_dep = nlohmann::json::object();
  for (const auto& [label, counts] : report.per_dep_label) {
    per_dep[vocab.dep_label(label)] = {
        {"gold", counts.gold}, {"predicted", counts.predicted}, {"matched", counts.matched}};
  }
  nlohmann::json j{
      {"precision", report.precision},
      {"recall", report.recall},
      {"f1", report.f1},
      {"uas", report.uas},
      {"las", report.las},
      {"gold_spans", report.gold_spans},
      {"predicted_spans", report.predicted_spans},
      {"matched_spans", report.matched_spans},
      {"scored_words", report.scored_words},
      {"correct_heads", report.correct_heads},
      {"correct_labeled", report.correct_labeled},
      {"per_constituent_label", per_const},
      {"per_dependency_label", per_dep},
  };
  out << j.dump(2) << "\n";
}

}  // namespace lap
