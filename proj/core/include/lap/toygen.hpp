#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lap/treebank.hpp"

namespace lap {

// Word emissions of one preterminal category of the toy grammar.
struct ToyLexicon {
  std::string tag;
  std::vector<std::string> words;
  std::vector<double> probs;
};

const std::vector<ToyLexicon>& toy_lexicon();

// Small PCFG corpus: sentence lengths 3..10 by rejection sampling, dependency
// arcs by head percolation over the grammar rules, deterministic per seed.
Treebank generate_toy_corpus(uint64_t seed, size_t size);

}  // namespace lap
