#include "lap/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace lap {
namespace {

size_t argmax(const std::vector<double>& v) {
  size_t best = 0;
  for (size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

std::string label_name(const Vocab& vocab, size_t id) {
  if (id == Vocab::kEmptyLabelId) return "<none>";
  if (id >= vocab.num_const_labels()) return "<oov>";
  return vocab.const_label(id);
}

}  // namespace

const char* to_string(ContributionMode mode) {
  return mode == ContributionMode::l1_average ? "l1_average" : "softmax";
}

std::vector<double> head_contributions(const Tensor& span_vec, const LabelAttentionConfig& config,
                                       ContributionMode mode) {
  if (config.use_pfl) {
    throw InputError(
        "head contributions need use_pfl=false: the position-wise feed-forward layer mixes "
        "the concatenated head outputs, so per-head slices are no longer attributable");
  }
  const size_t h = config.num_heads;
  if (span_vec.shape().size() != 1 || span_vec.size() % h != 0 || span_vec.size() == 0) {
    throw TensorError("head_contributions: span vector length " + std::to_string(span_vec.size()) +
                      " does not split into " + std::to_string(h) + " head slices");
  }
  const size_t d = span_vec.size() / h;
  const std::vector<double>& v = span_vec.values();

  std::vector<double> mass(h, 0.0);
  double total = 0.0;
  for (size_t i = 0; i < h; ++i) {
    for (size_t k = 0; k < d; ++k) mass[i] += std::abs(v[i * d + k]);
    total += mass[i];
  }

  std::vector<double> out(h);
  if (mode == ContributionMode::l1_average) {
    if (total == 0.0) {
      std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(h));
    } else {
      for (size_t i = 0; i < h; ++i) out[i] = mass[i] / total;
    }
    return out;
  }

  double max_mean = 0.0;
  for (size_t i = 0; i < h; ++i) {
    mass[i] /= static_cast<double>(d);
    max_mean = std::max(max_mean, mass[i]);
  }
  double z = 0.0;
  for (size_t i = 0; i < h; ++i) {
    out[i] = std::exp(mass[i] - max_mean);
    z += out[i];
  }
  for (double& x : out) x /= z;
  return out;
}

std::vector<HeadTrace> attention_trace(const Sentence& sentence, ParserModel& model,
                                       const ParseTree* gold, ContributionMode mode) {
  const LabelAttentionConfig& lal = model.config.encoder.lal;
  if (lal.query_mode != QueryMode::kVector) {
    throw InputError(
        "attention_trace needs query_mode=vector: matrix queries give one attention row per "
        "word rather than one per head");
  }
  if (lal.use_pfl) {
    throw InputError(
        "attention_trace needs use_pfl=false: head contributions are not attributable through "
        "the shared feed-forward layer");
  }

  Rng rng(0);
  AttentionOutput out = encode(sentence, model.encoder, model.config.encoder, model.vocab, rng,
                               false);
  const size_t h = lal.num_heads;
  const size_t n = sentence.size();

  std::vector<std::vector<double>> rows(h, std::vector<double>(n));
  const std::vector<double>& att = out.head_attention.values();
  for (size_t i = 0; i < h; ++i) {
    for (size_t j = 0; j < n; ++j) rows[i][j] = att[i * n + j];
  }

  SpanChart chart = score_all_spans(out.word_reps, model.span_scorer, h,
                                    model.vocab.num_const_labels());
  ParseTree predicted = cky_decode(chart).first;

  Tensor augmented =
      augment_word_reps(out.word_reps, model.span_scorer.start_rep, model.span_scorer.stop_rep);

  std::vector<HeadTrace> traces;
  for (const LabeledSpan& sp : predicted.labeled_spans()) {
    HeadTrace trace;
    trace.start = sp.start;
    trace.end = sp.end;
    trace.predicted_label = sp.label;
    trace.attention = rows;
    Tensor span_vec = span_vector(augmented, sp.start, sp.end, h);
    trace.contributions = head_contributions(span_vec, lal, mode);
    if (gold) {
      trace.gold_label = Vocab::kEmptyLabelId;
      for (const LabeledSpan& gs : gold->labeled_spans()) {
        if (gs.start == sp.start && gs.end == sp.end) trace.gold_label = gs.label;
      }
    }
    traces.push_back(std::move(trace));
  }
  return traces;
}

HeadStats aggregate_stats(const std::vector<HeadTrace>& traces) {
  if (traces.empty()) throw InputError("aggregate_stats: no traces given");
  HeadStats stats;
  stats.num_heads = traces[0].contributions.size();

  for (const HeadTrace& t : traces) {
    if (t.contributions.size() != stats.num_heads) {
      throw InputError("aggregate_stats: traces disagree on the number of heads");
    }
    size_t top = argmax(t.contributions);
    auto& freq = stats.top_head_freq[t.predicted_label];
    auto& mean = stats.mean_contribution[t.predicted_label];
    freq.resize(stats.num_heads, 0.0);
    mean.resize(stats.num_heads, 0.0);
    freq[top] += 1.0;
    for (size_t i = 0; i < stats.num_heads; ++i) mean[i] += t.contributions[i];
    stats.span_count[t.predicted_label] += 1;

    if (t.gold_label != HeadTrace::kNoGold && t.gold_label != t.predicted_label) {
      auto& cfreq = stats.confusion_top_head_freq[t.gold_label];
      cfreq.resize(stats.num_heads, 0.0);
      cfreq[top] += 1.0;
      stats.confusion_count[t.gold_label] += 1;
    }
  }

  for (auto& [label, count] : stats.span_count) {
    for (double& f : stats.top_head_freq[label]) f /= static_cast<double>(count);
    for (double& m : stats.mean_contribution[label]) m /= static_cast<double>(count);
  }
  for (auto& [label, count] : stats.confusion_count) {
    for (double& f : stats.confusion_top_head_freq[label]) f /= static_cast<double>(count);
  }
  return stats;
}

void write_traces_jsonl(std::ostream& out, const std::vector<HeadTrace>& traces,
                        const Vocab& vocab) {
  for (const HeadTrace& t : traces) {
    nlohmann::json j;
    j["start"] = t.start;
    j["end"] = t.end;
    j["predicted_label"] = label_name(vocab, t.predicted_label);
    if (t.gold_label == HeadTrace::kNoGold) {
      j["gold_label"] = nullptr;
    } else {
      j["gold_label"] = label_name(vocab, t.gold_label);
    }
    j["contributions"] = t.contributions;
    j["attention"] = t.attention;
    out << j.dump() << '\n';
  }
}

void write_head_stats_csv(std::ostream& out, const HeadStats& stats, const Vocab& vocab) {
  std::ostringstream row;
  row.precision(12);
  out << "label,head,frequency,mean_contribution\n";
  for (const auto& [label, freq] : stats.top_head_freq) {
    const std::vector<double>& mean = stats.mean_contribution.at(label);
    for (size_t i = 0; i < stats.num_heads; ++i) {
      row.str("");
      row << label_name(vocab, label) << ',' << i << ',' << freq[i] << ',' << mean[i] << '\n';
      out << row.str();
    }
  }
}

void write_confusion_csv(std::ostream& out, const HeadStats& stats, const Vocab& vocab) {
  std::ostringstream row;
  row.precision(12);
  out << "gold_label,head,frequency\n";
  for (const auto& [label, freq] : stats.confusion_top_head_freq) {
    for (size_t i = 0; i < stats.num_heads; ++i) {
      row.str("");
      row << label_name(vocab, label) << ',' << i << ',' << freq[i] << '\n';
      out << row.str();
    }
  }
}

}  // namespace lap
