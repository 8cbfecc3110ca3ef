#include "lap/toygen.hpp"

#include "lap/rng.hpp"

namespace lap {
namespace {

enum Cat { kD = 0, kA, kN, kV, kP };

// Sentences come from S -> NP VP [.], with the VP head as the root child and
// every other word attached to its rule's head child.
class Generator {
 public:
  explicit Generator(Rng& rng) : rng_(rng) {}

  struct Result {
    Sentence sentence;
    std::vector<RawSpan> spans;
    std::vector<size_t> heads;
    std::vector<std::string> labels;
  };

  Result generate() {
    out_ = {};
    size_t subject = gen_np(0);
    size_t verb = gen_vp(0);
    attach(subject, verb, "subj");
    if (rng_.uniform01() < 0.3) {
      size_t dot = emit(".", "PUNCT");
      attach(dot, verb, "punct");
    }
    out_.spans.push_back({0, out_.sentence.size(), "S"});
    return std::move(out_);
  }

 private:
  size_t emit(const std::string& word, const std::string& tag) {
    out_.sentence.tokens.push_back({word, tag});
    out_.heads.push_back(0);
    out_.labels.push_back("root");
    return out_.sentence.size() - 1;
  }

  size_t emit_lex(Cat cat) {
    const ToyLexicon& lex = toy_lexicon()[cat];
    return emit(lex.words[rng_.choose(lex.probs)], lex.tag);
  }

  void attach(size_t dep, size_t head, const char* label) {
    out_.heads[dep] = head + 1;
    out_.labels[dep] = label;
  }

  size_t gen_np(int depth) {
    size_t start = out_.sentence.size();
    std::vector<double> w = {0.5, 0.2, 0.15, 0.15};  // D N | D A N | NP PP | N
    if (depth >= 3) w[2] = 0.0;
    size_t head = 0;
    switch (rng_.choose(w)) {
      case 0: {
        size_t det = emit_lex(kD);
        head = emit_lex(kN);
        attach(det, head, "det");
        break;
      }
      case 1: {
        size_t det = emit_lex(kD);
        size_t adj = emit_lex(kA);
        head = emit_lex(kN);
        attach(det, head, "det");
        attach(adj, head, "amod");
        break;
      }
      case 2: {
        head = gen_np(depth + 1);
        attach(gen_pp(depth + 1), head, "prep");
        break;
      }
      default:
        head = emit_lex(kN);
    }
    out_.spans.push_back({start, out_.sentence.size(), "NP"});
    return head;
  }

  size_t gen_vp(int depth) {
    size_t start = out_.sentence.size();
    std::vector<double> w = {0.45, 0.2, 0.15, 0.2};  // V NP | V | VP PP | V NP PP
    if (depth >= 3) w[2] = 0.0;
    size_t head = 0;
    switch (rng_.choose(w)) {
      case 0: {
        head = emit_lex(kV);
        attach(gen_np(depth + 1), head, "obj");
        break;
      }
      case 1:
        head = emit_lex(kV);
        break;
      case 2: {
        head = gen_vp(depth + 1);
        attach(gen_pp(depth + 1), head, "prep");
        break;
      }
      default: {
        head = emit_lex(kV);
        attach(gen_np(depth + 1), head, "obj");
        attach(gen_pp(depth + 1), head, "prep");
      }
    }
    out_.spans.push_back({start, out_.sentence.size(), "VP"});
    return head;
  }

  size_t gen_pp(int depth) {
    size_t start = out_.sentence.size();
    size_t head = emit_lex(kP);
    attach(gen_np(depth + 1), head, "pobj");
    out_.spans.push_back({start, out_.sentence.size(), "PP"});
    return head;
  }

  Rng& rng_;
  Result out_;
};

}  // namespace

const std::vector<ToyLexicon>& toy_lexicon() {
  static const std::vector<ToyLexicon> lexicon = {
      {"D", {"the", "a"}, {0.6, 0.4}},
      {"A", {"big", "red", "old"}, {0.5, 0.3, 0.2}},
      {"N", {"cat", "dog", "bird", "fish", "mouse"}, {0.25, 0.25, 0.2, 0.15, 0.15}},
      {"V", {"sat", "saw", "chased", "found"}, {0.3, 0.3, 0.25, 0.15}},
      {"P", {"on", "under", "near"}, {0.4, 0.35, 0.25}},
  };
  return lexicon;
}

Treebank generate_toy_corpus(uint64_t seed, size_t size) {
  if (size == 0) throw InputError("toy corpus: size must be at least 1");
  Rng rng(seed);
  Generator gen(rng);
  Treebank bank;
  while (bank.entries.size() < size) {
    Generator::Result r = gen.generate();
    const size_t n = r.sentence.size();
    if (n < 3 || n > 10) continue;

    TreebankEntry entry;
    entry.sentence = r.sentence;
    entry.tree.length = n;
    for (const RawSpan& sp : r.spans) {
      entry.tree.spans.push_back({sp.start, sp.end, bank.vocab.add_const_label(sp.label)});
    }
    entry.tree.sort_spans();
    entry.tree.validate();
    for (size_t i = 0; i < n; ++i) {
      entry.deps.heads.push_back(r.heads[i]);
      entry.deps.labels.push_back(bank.vocab.add_dep_label(r.labels[i]));
    }
    entry.deps.validate();
    for (const Token& t : r.sentence.tokens) {
      bank.vocab.add_word(t.word);
      bank.vocab.add_tag(t.tag);
    }
    bank.entries.push_back(std::move(entry));
  }
  return bank;
}

}  // namespace lap
