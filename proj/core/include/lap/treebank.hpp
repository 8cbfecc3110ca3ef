#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "lap/constituency.hpp"
#include "lap/dependency.hpp"
#include "lap/encoder.hpp"
#include "lap/errors.hpp"

namespace lap {

// One bracketed tree with string labels, before vocabulary mapping. Unary
// nonterminal chains arrive collapsed into composite labels joined by '+'.
struct RawSpan {
  size_t start = 0;
  size_t end = 0;
  std::string label;
};

struct RawTree {
  Sentence sentence;
  std::vector<RawSpan> spans;
};

// Parses one PTB-style line `(LABEL (POS word) ...)`. line_no is used in
// error messages only.
RawTree parse_bracket_line(const std::string& line, size_t line_no);

// One CoNLL-style sentence: index TAB word TAB POS TAB head TAB label rows.
struct RawDepSentence {
  Sentence sentence;
  std::vector<size_t> heads;
  std::vector<std::string> labels;
};

// Reads blank-line-separated sentences; source names the stream in errors.
std::vector<RawDepSentence> parse_conll(std::istream& in, const std::string& source);

// One tree per line. Composite labels re-expand into unary chains; an
// unlabeled root span is wrapped as TOP. Empty-labeled spans are dropped.
std::string serialize_tree(const ParseTree& tree, const Sentence& sentence, const Vocab& vocab);

void write_conll(std::ostream& out, const Sentence& sentence, const DepArcs& deps,
                 const Vocab& vocab);

struct TreebankEntry {
  Sentence sentence;
  ParseTree tree;
  DepArcs deps;
};

struct Treebank {
  Vocab vocab;
  std::vector<TreebankEntry> entries;

  size_t size() const { return entries.size(); }
};

// Aligned bracket + dependency streams -> validated treebank. With fixed
// nullptr the vocabulary is built from the data; otherwise it is used as-is
// (unseen words/tags fall back to <unk>, unseen labels to Vocab::kNoId).
Treebank load_treebank_streams(std::istream& trees, std::istream& deps,
                               const std::string& tree_source, const std::string& dep_source,
                               const Vocab* fixed = nullptr);

Treebank load_treebank(const std::string& tree_path, const std::string& dep_path,
                       const Vocab* fixed = nullptr);

}  // namespace lap
