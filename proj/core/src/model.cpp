#include "lap/model.hpp"

namespace lap {

void ModelConfig::validate() const {
  encoder.validate();
  if (span_hidden == 0) throw InputError("model config: span_hidden must be positive");
  if (dep_rank == 0) throw InputError("model config: dep_rank must be positive");
  if (encoder.lal.d_out % 2 != 0) {
    throw InputError("model config: d_out must be even to split span halves");
  }
}

ParserModel ParserModel::init(const ModelConfig& config, const Vocab& vocab, uint64_t seed) {
  ModelConfig resolved = config;
  if (resolved.encoder.lal.num_heads == 0) {
    resolved.encoder.lal.num_heads = vocab.num_const_labels();
  }
  resolved.validate();
  if (vocab.num_const_labels() < 2) {
    throw InputError("model init: vocabulary has no constituency labels");
  }
  if (vocab.num_dep_labels() == 0) {
    throw InputError("model init: vocabulary has no dependency labels");
  }
  ParserModel m;
  m.config = resolved;
  m.vocab = vocab;
  Rng rng(seed);
  m.encoder = EncoderParams::init(vocab, resolved.encoder, rng);
  m.span_scorer =
      SpanScorerParams::init(resolved.width(), resolved.span_hidden, vocab.num_const_labels(), rng);
  m.biaffine =
      BiaffineParams::init(resolved.width(), resolved.dep_rank, vocab.num_dep_labels(), rng);
  return m;
}

void ParserModel::collect(std::vector<NamedParam>& out) {
  encoder.collect("enc", out);
  span_scorer.collect("span", out);
  biaffine.collect("dep", out);
}

size_t ParserModel::parameter_count() {
  std::vector<NamedParam> all;
  collect(all);
  size_t total = 0;
  for (const NamedParam& p : all) total += p.tensor.size();
  return total;
}

Tensor ParserModel::loss(const TreebankEntry& gold, Rng& rng, bool training) {
  gold.tree.validate();
  gold.deps.validate();
  if (gold.tree.length != gold.sentence.size() || gold.deps.size() != gold.sentence.size()) {
    throw InputError("loss: gold annotations do not match the sentence length");
  }

  AttentionOutput out = encode(gold.sentence, encoder, config.encoder, vocab, rng, training);

  SpanChart chart = score_all_spans(out.word_reps, span_scorer, config.encoder.lal.num_heads,
                                    vocab.num_const_labels());
  Tensor constituency = hinge_loss(chart, gold.tree);

  DepScores scores = biaffine_arc_scores(out.word_reps, biaffine);
  std::vector<Tensor> gold_labels;
  for (size_t i = 0; i < gold.deps.size(); ++i) {
    gold_labels.push_back(label_scores(scores, biaffine, i, gold.deps.heads[i]));
  }
  Tensor dependency = dep_loss(scores.arc_scores, gold_labels, gold.deps);

  return add(constituency, dependency);
}

ParserModel::Prediction ParserModel::predict(const Sentence& sentence) {
  Rng rng(0);  // dropout is off outside training; never drawn from
  AttentionOutput out = encode(sentence, encoder, config.encoder, vocab, rng, false);

  Prediction pred;
  SpanChart chart = score_all_spans(out.word_reps, span_scorer, config.encoder.lal.num_heads,
                                    vocab.num_const_labels());
  pred.tree = cky_decode(chart).first;

  DepScores scores = biaffine_arc_scores(out.word_reps, biaffine);
  pred.deps = decode_arcs(scores.arc_scores);
  const size_t m = biaffine.num_labels();
  for (size_t i = 0; i < sentence.size(); ++i) {
    Tensor scored = label_scores(scores, biaffine, i, pred.deps.heads[i]);
    const std::vector<double>& ls = scored.values();
    size_t best = 0;
    for (size_t l = 1; l < m; ++l) {
      if (ls[l] > ls[best]) best = l;
    }
    pred.deps.labels[i] = best;
  }
  return pred;
}

}  // namespace lap
