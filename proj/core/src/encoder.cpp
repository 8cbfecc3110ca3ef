#include "lap/encoder.hpp"

#include <cmath>

namespace lap {
namespace {

size_t get_or_add(std::vector<std::string>& list, std::unordered_map<std::string, size_t>& ids,
                  const std::string& s) {
  auto it = ids.find(s);
  if (it != ids.end()) return it->second;
  size_t id = list.size();
  list.push_back(s);
  ids.emplace(s, id);
  return id;
}

size_t lookup(const std::unordered_map<std::string, size_t>& ids, const std::string& s,
              size_t fallback) {
  auto it = ids.find(s);
  return it == ids.end() ? fallback : it->second;
}

Tensor init_embedding(size_t rows, size_t cols, Rng& rng) {
  double bound = std::sqrt(1.0 / static_cast<double>(cols));
  return Tensor::random_uniform({rows, cols}, bound, rng, true);
}

}  // namespace

Vocab::Vocab() {
  add_word("<unk>");
  add_word("<pad>");
  add_tag("<unk>");
  add_tag("<pad>");
  add_const_label("");
}

size_t Vocab::add_word(const std::string& w) { return get_or_add(words_, word_ids_, w); }
size_t Vocab::add_tag(const std::string& t) { return get_or_add(tags_, tag_ids_, t); }
size_t Vocab::add_const_label(const std::string& l) {
  return get_or_add(const_labels_, const_label_ids_, l);
}
size_t Vocab::add_dep_label(const std::string& l) {
  return get_or_add(dep_labels_, dep_label_ids_, l);
}

size_t Vocab::word_id(const std::string& w) const { return lookup(word_ids_, w, kUnkId); }
size_t Vocab::tag_id(const std::string& t) const { return lookup(tag_ids_, t, kUnkId); }
size_t Vocab::const_label_id(const std::string& l) const {
  return lookup(const_label_ids_, l, kNoId);
}
size_t Vocab::dep_label_id(const std::string& l) const {
  return lookup(dep_label_ids_, l, kNoId);
}

SelfAttentionConfig EncoderConfig::self_attention() const {
  SelfAttentionConfig cfg;
  cfg.num_heads = sa_heads;
  cfg.d_model = d_model();
  cfg.pfl_hidden = sa_pfl_hidden;
  return cfg;
}

void EncoderConfig::validate() const {
  if (d_content == 0 || d_position == 0) {
    throw InputError("encoder config: content and position widths must be positive");
  }
  if (max_len == 0) throw InputError("encoder config: max_len must be positive");
  if (num_layers > 0) {
    if (sa_heads == 0 || d_model() % sa_heads != 0) {
      throw InputError("encoder config: d_model " + std::to_string(d_model()) +
                       " not divisible by sa_heads " + std::to_string(sa_heads));
    }
  }
  if (lal.d_model != d_model()) {
    throw InputError("encoder config: label attention d_model " + std::to_string(lal.d_model) +
                     " != d_content + d_position " + std::to_string(d_model()));
  }
  lal.validate();
}

EncoderParams EncoderParams::init(const Vocab& vocab, const EncoderConfig& config, Rng& rng) {
  config.validate();
  EncoderParams p;
  p.word_emb = init_embedding(vocab.num_words(), config.d_content, rng);
  p.tag_emb = init_embedding(vocab.num_tags(), config.d_content, rng);
  p.pos_emb = init_embedding(config.max_len, config.d_position, rng);
  SelfAttentionConfig sa = config.self_attention();
  p.layers.reserve(config.num_layers);
  for (size_t l = 0; l < config.num_layers; ++l) {
    p.layers.push_back(SelfAttentionParams::init(sa, rng));
  }
  p.lal = LabelAttentionParams::init(config.lal, rng);
  return p;
}

void EncoderParams::collect(const std::string& prefix, std::vector<NamedParam>& out) {
  out.push_back({prefix + ".word_emb", word_emb});
  out.push_back({prefix + ".tag_emb", tag_emb});
  out.push_back({prefix + ".pos_emb", pos_emb});
  for (size_t l = 0; l < layers.size(); ++l) {
    layers[l].collect(prefix + ".sa" + std::to_string(l), out);
  }
  lal.collect(prefix + ".lal", out);
}

Tensor embed(const Sentence& sentence, EncoderParams& params, const EncoderConfig& config,
             const Vocab& vocab) {
  size_t n = sentence.size();
  if (n == 0) throw InputError("embed: empty sentence");
  if (n > config.max_len) {
    throw InputError("embed: sentence length " + std::to_string(n) + " exceeds max_len " +
                     std::to_string(config.max_len));
  }
  std::vector<size_t> word_ids(n), tag_ids(n), positions(n);
  for (size_t j = 0; j < n; ++j) {
    word_ids[j] = vocab.word_id(sentence.tokens[j].word);
    tag_ids[j] = vocab.tag_id(sentence.tokens[j].tag);
    positions[j] = j;
  }
  Tensor content = add(gather_rows(params.word_emb, word_ids), gather_rows(params.tag_emb, tag_ids));
  Tensor position = gather_rows(params.pos_emb, positions);
  return concat({transpose(content), transpose(position)}, 0);
}

AttentionOutput encode(const Sentence& sentence, EncoderParams& params,
                       const EncoderConfig& config, const Vocab& vocab, Rng& rng, bool training) {
  config.validate();
  Tensor x = embed(sentence, params, config, vocab);
  SelfAttentionConfig sa = config.self_attention();
  for (size_t l = 0; l < config.num_layers; ++l) {
    AttentionOutput out = self_attention_forward(x, params.layers[l], sa, rng, training);
    x = transpose(out.word_reps);
  }
  return lal_forward(x, params.lal, config.lal, rng, training);
}

}  // namespace lap
