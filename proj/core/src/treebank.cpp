#include "lap/treebank.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace lap {
namespace {

struct BracketToken {
  enum Kind { kOpen, kClose, kAtom } kind;
  std::string text;
};

std::vector<BracketToken> lex_brackets(const std::string& line) {
  std::vector<BracketToken> out;
  size_t i = 0;
  while (i < line.size()) {
    char c = line[i];
    if (c == '(') {
      out.push_back({BracketToken::kOpen, "("});
      ++i;
    } else if (c == ')') {
      out.push_back({BracketToken::kClose, ")"});
      ++i;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else {
      size_t j = i;
      while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j])) &&
             line[j] != '(' && line[j] != ')')
        ++j;
      out.push_back({BracketToken::kAtom, line.substr(i, j - i)});
      i = j;
    }
  }
  return out;
}

struct BracketParser {
  const std::vector<BracketToken>& tokens;
  size_t pos = 0;
  size_t line_no;
  RawTree tree;

  [[noreturn]] void fail(const std::string& what) const {
    throw InputError("line " + std::to_string(line_no) + ": " + what);
  }

  // Parses one node; returns the index of its RawSpan, or -1 for a
  // preterminal. Unary nonterminal chains collapse into one span whose label
  // joins the chain with '+'.
  int parse_node() {
    if (tokens[pos].kind != BracketToken::kOpen) fail("expected '('");
    ++pos;
    if (pos >= tokens.size() || tokens[pos].kind != BracketToken::kAtom) {
      fail("expected a label after '('");
    }
    std::string label = tokens[pos].text;
    ++pos;

    const size_t start = tree.sentence.size();
    bool saw_word = false;
    std::vector<int> child_spans;
    while (pos < tokens.size() && tokens[pos].kind != BracketToken::kClose) {
      if (tokens[pos].kind == BracketToken::kAtom) {
        if (saw_word || !child_spans.empty()) {
          fail("word '" + tokens[pos].text + "' outside a preterminal");
        }
        tree.sentence.tokens.push_back({tokens[pos].text, label});
        saw_word = true;
        ++pos;
      } else {
        if (saw_word) fail("preterminal '" + label + "' has a nested node");
        child_spans.push_back(parse_node());
      }
    }
    if (pos >= tokens.size()) fail("unbalanced '('");
    ++pos;  // ')'

    if (saw_word) return -1;
    if (child_spans.empty()) fail("node '" + label + "' has no children");

    const size_t end = tree.sentence.size();
    if (child_spans.size() == 1 && child_spans[0] >= 0) {
      RawSpan& inner = tree.spans[static_cast<size_t>(child_spans[0])];
      inner.label = label + "+" + inner.label;
      return child_spans[0];
    }
    tree.spans.push_back({start, end, label});
    return static_cast<int>(tree.spans.size()) - 1;
  }
};

size_t parse_index(const std::string& text, const std::string& source, size_t line_no) {
  size_t value = 0;
  size_t used = 0;
  if (!text.empty() && text[0] != '-') {
    try {
      value = std::stoul(text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
  }
  if (used != text.size() || text.empty()) {
    throw InputError(source + " line " + std::to_string(line_no) + ": '" + text +
                     "' is not a number");
  }
  return value;
}

std::vector<std::string> split_label(const std::string& label) {
  std::vector<std::string> parts;
  size_t start = 0;
  while (true) {
    size_t plus = label.find('+', start);
    if (plus == std::string::npos) {
      parts.push_back(label.substr(start));
      return parts;
    }
    parts.push_back(label.substr(start, plus - start));
    start = plus + 1;
  }
}

void emit_node(std::ostream& out, size_t i, size_t j, const std::string& label,
               const std::vector<LabeledSpan>& spans, size_t& next, const Sentence& sentence,
               const Vocab& vocab) {
  std::vector<std::string> parts = split_label(label);
  for (const std::string& p : parts) out << "(" << p << " ";
  size_t pos = i;
  bool first = true;
  while (pos < j) {
    if (!first) out << " ";
    first = false;
    if (next < spans.size() && spans[next].start == pos && spans[next].end <= j) {
      LabeledSpan sp = spans[next++];
      emit_node(out, sp.start, sp.end, vocab.const_label(sp.label), spans, next, sentence, vocab);
      pos = sp.end;
    } else {
      out << "(" << sentence.tokens[pos].tag << " " << sentence.tokens[pos].word << ")";
      ++pos;
    }
  }
  for (size_t k = 0; k < parts.size(); ++k) out << ")";
}

}  // namespace

RawTree parse_bracket_line(const std::string& line, size_t line_no) {
  std::vector<BracketToken> tokens = lex_brackets(line);
  if (tokens.empty()) {
    throw InputError("line " + std::to_string(line_no) + ": empty tree");
  }
  BracketParser parser{tokens, 0, line_no, {}};
  int root = parser.parse_node();
  if (parser.pos != tokens.size()) parser.fail("trailing text after the tree");
  if (root < 0) parser.fail("tree has no phrasal node");
  return std::move(parser.tree);
}

std::vector<RawDepSentence> parse_conll(std::istream& in, const std::string& source) {
  std::vector<RawDepSentence> out;
  RawDepSentence current;
  std::string line;
  size_t line_no = 0;

  auto flush = [&]() {
    if (!current.sentence.tokens.empty()) {
      out.push_back(std::move(current));
      current = {};
    }
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      flush();
      continue;
    }
    std::vector<std::string> cols;
    size_t start = 0;
    while (true) {
      size_t tab = line.find('\t', start);
      if (tab == std::string::npos) {
        cols.push_back(line.substr(start));
        break;
      }
      cols.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    if (cols.size() != 5) {
      throw InputError(source + " line " + std::to_string(line_no) + ": want 5 tab-separated " +
                       "columns, got " + std::to_string(cols.size()));
    }
    size_t index = parse_index(cols[0], source, line_no);
    if (index != current.sentence.size() + 1) {
      throw InputError(source + " line " + std::to_string(line_no) + ": token index " +
                       cols[0] + " out of order");
    }
    current.sentence.tokens.push_back({cols[1], cols[2]});
    current.heads.push_back(parse_index(cols[3], source, line_no));
    current.labels.push_back(cols[4]);
  }
  flush();
  return out;
}

std::string serialize_tree(const ParseTree& tree, const Sentence& sentence, const Vocab& vocab) {
  if (tree.length != sentence.size()) {
    throw InputError("serialize: tree length " + std::to_string(tree.length) + " vs " +
                     std::to_string(sentence.size()) + " words");
  }
  std::vector<LabeledSpan> spans = tree.labeled_spans();
  std::ostringstream out;
  size_t next = 0;
  if (!spans.empty() && spans[0].start == 0 && spans[0].end == tree.length) {
    ++next;
    emit_node(out, 0, tree.length, vocab.const_label(spans[0].label), spans, next, sentence,
              vocab);
  } else {
    emit_node(out, 0, tree.length, "TOP", spans, next, sentence, vocab);
  }
  return out.str();
}

void write_conll(std::ostream& out, const Sentence& sentence, const DepArcs& deps,
                 const Vocab& vocab) {
  if (deps.size() != sentence.size()) {
    throw InputError("write_conll: " + std::to_string(deps.size()) + " arcs vs " +
                     std::to_string(sentence.size()) + " words");
  }
  for (size_t i = 0; i < sentence.size(); ++i) {
    out << (i + 1) << '\t' << sentence.tokens[i].word << '\t' << sentence.tokens[i].tag << '\t'
        << deps.heads[i] << '\t' << vocab.dep_label(deps.labels[i]) << '\n';
  }
  out << '\n';
}

Treebank load_treebank_streams(std::istream& trees, std::istream& deps,
                               const std::string& tree_source, const std::string& dep_source,
                               const Vocab* fixed) {
  std::vector<RawTree> raw_trees;
  std::string line;
  size_t line_no = 0;
  while (std::getline(trees, line)) {
    ++line_no;
    bool blank = true;
    for (char c : line) {
      if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
    }
    if (blank) continue;
    try {
      raw_trees.push_back(parse_bracket_line(line, line_no));
    } catch (const InputError& e) {
      throw InputError(tree_source + " " + e.what());
    }
  }

  std::vector<RawDepSentence> raw_deps = parse_conll(deps, dep_source);
  if (raw_trees.size() != raw_deps.size()) {
    throw InputError("alignment: " + std::to_string(raw_trees.size()) + " trees in " +
                     tree_source + " vs " + std::to_string(raw_deps.size()) + " sentences in " +
                     dep_source);
  }

  Treebank bank;
  if (fixed) bank.vocab = *fixed;

  for (size_t s = 0; s < raw_trees.size(); ++s) {
    const RawTree& rt = raw_trees[s];
    const RawDepSentence& rd = raw_deps[s];
    if (rt.sentence.size() != rd.sentence.size()) {
      throw InputError("alignment: sentence " + std::to_string(s + 1) + " has " +
                       std::to_string(rt.sentence.size()) + " words in " + tree_source + " vs " +
                       std::to_string(rd.sentence.size()) + " in " + dep_source);
    }
    for (size_t i = 0; i < rt.sentence.size(); ++i) {
      if (rt.sentence.tokens[i].word != rd.sentence.tokens[i].word) {
        throw InputError("alignment: sentence " + std::to_string(s + 1) + " word " +
                         std::to_string(i + 1) + " is '" + rt.sentence.tokens[i].word + "' in " +
                         tree_source + " but '" + rd.sentence.tokens[i].word + "' in " +
                         dep_source);
      }
    }

    TreebankEntry entry;
    entry.sentence = rt.sentence;
    entry.tree.length = rt.sentence.size();
    for (const RawSpan& sp : rt.spans) {
      size_t label = fixed ? bank.vocab.const_label_id(sp.label)
                           : bank.vocab.add_const_label(sp.label);
      entry.tree.spans.push_back({sp.start, sp.end, label});
    }
    entry.tree.sort_spans();
    entry.tree.validate();

    const size_t n = rt.sentence.size();
    for (size_t i = 0; i < n; ++i) {
      if (rd.heads[i] > n) {
        throw InputError(dep_source + ": sentence " + std::to_string(s + 1) + " head " +
                         std::to_string(rd.heads[i]) + " out of range for " + std::to_string(n) +
                         " words");
      }
      entry.deps.heads.push_back(rd.heads[i]);
      size_t label = fixed ? bank.vocab.dep_label_id(rd.labels[i])
                           : bank.vocab.add_dep_label(rd.labels[i]);
      entry.deps.labels.push_back(label);
    }
    entry.deps.validate();

    if (!fixed) {
      for (const Token& t : rt.sentence.tokens) {
        bank.vocab.add_word(t.word);
        bank.vocab.add_tag(t.tag);
      }
    }
    bank.entries.push_back(std::move(entry));
  }
  return bank;
}

Treebank load_treebank(const std::string& tree_path, const std::string& dep_path,
                       const Vocab* fixed) {
  std::ifstream trees(tree_path);
  if (!trees) throw InputError("cannot open " + tree_path);
  std::ifstream deps(dep_path);
  if (!deps) throw InputError("cannot open " + dep_path);
  return load_treebank_streams(trees, deps, tree_path, dep_path, fixed);
}

}  // namespace lap
