#pragma once

#include <cstdint>
#include <vector>

#include "lap/constituency.hpp"
#include "lap/dependency.hpp"
#include "lap/encoder.hpp"
#include "lap/treebank.hpp"

namespace lap {

struct ModelConfig {
  EncoderConfig encoder;
  size_t span_hidden = 64;  // span classifier hidden width
  size_t dep_rank = 32;     // biaffine role-representation width

  size_t width() const { return encoder.lal.output_width(); }
  void validate() const;
};

// Joint constituency + dependency parser: encoder stack, span classifier over
// fencepost differences, and biaffine arc/label scorers, all sharing the
// encoder's word representations.
struct ParserModel {
  ModelConfig config;
  Vocab vocab;
  EncoderParams encoder;
  SpanScorerParams span_scorer;
  BiaffineParams biaffine;

  static ParserModel init(const ModelConfig& config, const Vocab& vocab, uint64_t seed);

  // Every parameter tensor in fixed declaration order (the checkpoint layout).
  void collect(std::vector<NamedParam>& out);
  size_t parameter_count();

  // Margin loss of the gold tree plus dependency cross-entropy.
  Tensor loss(const TreebankEntry& gold, Rng& rng, bool training);

  struct Prediction {
    ParseTree tree;  // binary skeleton; empty labels on unlabeled spans
    DepArcs deps;
  };
  Prediction predict(const Sentence& sentence);
};

}  // namespace lap
