#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "lap/attention.hpp"
#include "lap/errors.hpp"
#include "lap/rng.hpp"
#include "lap/tensor.hpp"

namespace lap {

struct Token {
  std::string word;
  std::string tag;
};

struct Sentence {
  std::vector<Token> tokens;
  size_t size() const { return tokens.size(); }
};

// Dense string-to-id maps shared by the whole parser. Words and POS tags
// reserve <unk>/<pad> at ids 0/1; constituency label id 0 is the empty label.
// Label lookups of strings absent from the vocabulary return kNoId, which
// never collides with a real id.
class Vocab {
 public:
  static constexpr size_t kUnkId = 0;
  static constexpr size_t kPadId = 1;
  static constexpr size_t kEmptyLabelId = 0;
  static constexpr size_t kNoId = static_cast<size_t>(-1);

  Vocab();

  size_t add_word(const std::string& w);
  size_t add_tag(const std::string& t);
  size_t add_const_label(const std::string& l);
  size_t add_dep_label(const std::string& l);

  size_t word_id(const std::string& w) const;       // kUnkId when unseen
  size_t tag_id(const std::string& t) const;        // kUnkId when unseen
  size_t const_label_id(const std::string& l) const;  // kNoId when unseen
  size_t dep_label_id(const std::string& l) const;    // kNoId when unseen

  const std::string& word(size_t id) const { return words_.at(id); }
  const std::string& tag(size_t id) const { return tags_.at(id); }
  const std::string& const_label(size_t id) const { return const_labels_.at(id); }
  const std::string& dep_label(size_t id) const { return dep_labels_.at(id); }

  size_t num_words() const { return words_.size(); }
  size_t num_tags() const { return tags_.size(); }
  size_t num_const_labels() const { return const_labels_.size(); }
  size_t num_dep_labels() const { return dep_labels_.size(); }

  const std::vector<std::string>& word_list() const { return words_; }
  const std::vector<std::string>& tag_list() const { return tags_; }
  const std::vector<std::string>& const_label_list() const { return const_labels_; }
  const std::vector<std::string>& dep_label_list() const { return dep_labels_; }

 private:
  std::vector<std::string> words_, tags_, const_labels_, dep_labels_;
  std::unordered_map<std::string, size_t> word_ids_, tag_ids_, const_label_ids_, dep_label_ids_;
};

struct EncoderConfig {
  size_t num_layers = 3;
  size_t d_content = 0;
  size_t d_position = 0;
  size_t max_len = 64;
  size_t sa_heads = 8;
  size_t sa_pfl_hidden = 0;
  LabelAttentionConfig lal;

  size_t d_model() const { return d_content + d_position; }
  SelfAttentionConfig self_attention() const;
  void validate() const;
};

struct EncoderParams {
  Tensor word_emb;  // [num_words x d_content]
  Tensor tag_emb;   // [num_tags x d_content]
  Tensor pos_emb;   // [max_len x d_position]
  std::vector<SelfAttentionParams> layers;
  LabelAttentionParams lal;

  static EncoderParams init(const Vocab& vocab, const EncoderConfig& config, Rng& rng);
  void collect(const std::string& prefix, std::vector<NamedParam>& out);
};

// Column j = concat(word_emb[w_j] + tag_emb[t_j], position_emb[j]).
Tensor embed(const Sentence& sentence, EncoderParams& params, const EncoderConfig& config,
             const Vocab& vocab);

// Self-attention stack followed by the label attention layer.
AttentionOutput encode(const Sentence& sentence, EncoderParams& params,
                       const EncoderConfig& config, const Vocab& vocab, Rng& rng, bool training);

}  // namespace lap
