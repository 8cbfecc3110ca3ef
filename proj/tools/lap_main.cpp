#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lap/checkpoint.hpp"
#include "lap/config.hpp"
#include "lap/interpret.hpp"
#include "lap/metrics.hpp"
#include "lap/toygen.hpp"
#include "lap/trainer.hpp"
#include "lap/treebank.hpp"

namespace {

using namespace lap;

// Tokens are `word/POS` with the tag split off at the last slash; a token
// with no slash gets the unknown tag.
Sentence read_sentence_line(const std::string& line) {
  Sentence s;
  std::istringstream words(line);
  std::string token;
  while (words >> token) {
    size_t cut = token.rfind('/');
    if (cut == std::string::npos || cut == 0 || cut + 1 == token.size()) {
      s.tokens.push_back({token, "<unk>"});
    } else {
      s.tokens.push_back({token.substr(0, cut), token.substr(cut + 1)});
    }
  }
  return s;
}

Treebank load_or_generate(const std::string& trees, const std::string& deps, uint64_t seed,
                          size_t toy_size) {
  if (!trees.empty() && !deps.empty()) return load_treebank(trees, deps);
  if (trees.empty() != deps.empty()) {
    throw InputError("provide both --trees and --deps, or neither for a generated corpus");
  }
  return generate_toy_corpus(seed, toy_size);
}

void print_csv_header(std::ostream& out, const std::string& lead) {
  out << lead << ",precision,recall,f1,uas,las\n";
}

void print_csv_row(std::ostream& out, const std::string& lead, const EvalReport& r) {
  out << lead << "," << r.precision << "," << r.recall << "," << r.f1 << "," << r.uas << ","
      << r.las << "\n";
}

EvalReport run_once(const TrainConfig& config, const Treebank& bank, std::ostream* log) {
  ParserModel model = ParserModel::init(config.model, bank.vocab, config.seed);
  TrainConfig quiet = config;
  quiet.eval_every = 0;  // sweeps evaluate once, after training
  train(model, bank, quiet, log);
  std::set<std::string> punct(config.punct_tags.begin(), config.punct_tags.end());
  return evaluate(model, bank, punct);
}

int cmd_train(const std::string& trees, const std::string& deps, const std::string& config_path,
              const std::string& out_path) {
  TrainConfig config = load_train_config(config_path);
  std::string target = out_path.empty() ? config.checkpoint : out_path;
  if (target.empty()) {
    throw InputError("no checkpoint destination: pass --out or set \"checkpoint\" in the config");
  }
  Treebank bank = load_treebank(trees, deps);
  ParserModel model = ParserModel::init(config.model, bank.vocab, config.seed);
  TrainResult result = train(model, bank, config, &std::cout);
  if (result.stopped_early) {
    std::cout << "stopped early after " << result.epochs.size() << " epochs\n";
  }
  save_checkpoint(target, model);
  std::set<std::string> punct(config.punct_tags.begin(), config.punct_tags.end());
  write_report_json(std::cout, evaluate(model, bank, punct), model.vocab);
  return 0;
}

int cmd_parse(const std::string& model_path, const std::string& input_path,
              const std::string& format) {
  ParserModel model = load_checkpoint(model_path);
  std::ifstream in(input_path);
  if (!in) throw InputError("cannot open input file " + input_path);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    Sentence sentence = read_sentence_line(line);
    if (sentence.size() == 0) continue;
    ParserModel::Prediction pred = model.predict(sentence);
    if (format == "brackets") {
      std::cout << serialize_tree(pred.tree, sentence, model.vocab) << "\n";
    } else {
      write_conll(std::cout, sentence, pred.deps, model.vocab);
    }
  }
  if (line_no == 0) throw InputError("input file " + input_path + " is empty");
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& trees, const std::string& deps,
             const std::vector<std::string>& punct_tags) {
  ParserModel model = load_checkpoint(model_path);
  Treebank bank = load_treebank(trees, deps, &model.vocab);
  std::set<std::string> punct(punct_tags.begin(), punct_tags.end());
  write_report_json(std::cout, evaluate(model, bank, punct), model.vocab);
  return 0;
}

int cmd_inspect(const std::string& model_path, const std::string& trees,
                const std::string& out_dir, const std::string& mode_name) {
  ParserModel model = load_checkpoint(model_path);
  ContributionMode mode =
      mode_name == "softmax" ? ContributionMode::softmax : ContributionMode::l1_average;

  std::ifstream in(trees);
  if (!in) throw InputError("cannot open tree file " + trees);
  std::vector<HeadTrace> traces;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    RawTree raw = parse_bracket_line(line, line_no);
    ParseTree gold;
    gold.length = raw.sentence.size();
    for (const RawSpan& s : raw.spans) {
      gold.spans.push_back({s.start, s.end, model.vocab.const_label_id(s.label)});
    }
    gold.sort_spans();
    std::vector<HeadTrace> batch = attention_trace(raw.sentence, model, &gold, mode);
    traces.insert(traces.end(), batch.begin(), batch.end());
  }
  if (traces.empty()) throw InputError("no labeled spans were predicted; nothing to inspect");

  std::filesystem::create_directories(out_dir);
  std::filesystem::path dir(out_dir);
  std::ofstream trace_out(dir / "traces.jsonl");
  write_traces_jsonl(trace_out, traces, model.vocab);
  HeadStats stats = aggregate_stats(traces);
  std::ofstream stats_out(dir / "head_stats.csv");
  write_head_stats_csv(stats_out, stats, model.vocab);
  std::ofstream confusion_out(dir / "confusion.csv");
  write_confusion_csv(confusion_out, stats, model.vocab);
  std::cout << "wrote " << traces.size() << " traces to " << (dir / "traces.jsonl").string()
            << "\n";
  return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& trees, const std::string& deps,
               size_t toy_size) {
  TrainConfig config = load_train_config(config_path);
  Treebank bank = load_or_generate(trees, deps, config.seed, toy_size);

  double rd_p = config.model.encoder.lal.residual_dropout_p > 0.0
                    ? config.model.encoder.lal.residual_dropout_p
                    : 0.1;

  print_csv_header(std::cout, "pfl,rd");
  for (bool pfl : {true, false}) {
    for (bool rd : {true, false}) {
      TrainConfig c = config;
      c.model.encoder.lal.use_pfl = pfl;
      c.model.encoder.lal.residual_dropout_p = rd ? rd_p : 0.0;
      EvalReport r = run_once(c, bank, nullptr);
      print_csv_row(std::cout, std::string(pfl ? "yes" : "no") + "," + (rd ? "yes" : "no"), r);
    }
  }
  std::cout << "\n";
  print_csv_header(std::cout, "qv,conc");
  for (bool qv : {true, false}) {
    for (bool conc : {true, false}) {
      TrainConfig c = config;
      c.model.encoder.lal.query_mode = qv ? QueryMode::kVector : QueryMode::kMatrix;
      c.model.encoder.lal.combine_mode = conc ? CombineMode::kConcat : CombineMode::kProject;
      EvalReport r = run_once(c, bank, nullptr);
      print_csv_row(std::cout, std::string(qv ? "yes" : "no") + "," + (conc ? "yes" : "no"), r);
    }
  }
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::vector<size_t>& layers,
              const std::string& trees, const std::string& deps, size_t toy_size) {
  if (layers.empty()) throw InputError("sweep-layers: --layers list is empty");
  TrainConfig config = load_train_config(config_path);
  Treebank bank = load_or_generate(trees, deps, config.seed, toy_size);
  print_csv_header(std::cout, "layers");
  for (size_t l : layers) {
    TrainConfig c = config;
    c.model.encoder.num_layers = l;
    EvalReport r = run_once(c, bank, nullptr);
    print_csv_row(std::cout, std::to_string(l), r);
  }
  return 0;
}

int cmd_gen_toy(uint64_t seed, size_t size, const std::string& out_dir) {
  Treebank bank = generate_toy_corpus(seed, size);
  std::filesystem::create_directories(out_dir);
  std::filesystem::path dir(out_dir);

  std::ofstream trees(dir / "toy.trees");
  std::ofstream deps(dir / "toy.deps");
  if (!trees || !deps) throw InputError("cannot write corpus files under " + out_dir);
  for (const TreebankEntry& e : bank.entries) {
    trees << serialize_tree(e.tree, e.sentence, bank.vocab) << "\n";
    write_conll(deps, e.sentence, e.deps, bank.vocab);
  }
  std::cout << "wrote " << bank.entries.size() << " sentences to " << (dir / "toy.trees").string()
            << " and " << (dir / "toy.deps").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint constituency and dependency parser with label attention"};
  app.require_subcommand(1);

  std::string trees, deps, config_path, out_path, model_path, input_path;
  std::string format = "brackets";
  std::string mode_name = "l1_average";
  std::string out_dir = ".";
  std::vector<std::string> punct_tags = {"PUNCT"};
  std::vector<size_t> layers;
  uint64_t seed = 0;
  size_t size = 50;
  size_t toy_size = 50;

  CLI::App* train = app.add_subcommand("train", "Train a parser and write a checkpoint");
  train->add_option("--trees", trees, "Bracketed trees, one per line")->required();
  train->add_option("--deps", deps, "Dependency TSV aligned with --trees")->required();
  train->add_option("--config", config_path, "JSON training config")->required();
  train->add_option("--out", out_path, "Checkpoint destination");

  CLI::App* parse = app.add_subcommand("parse", "Parse plain sentences from a checkpoint");
  parse->add_option("--model", model_path, "Checkpoint to load")->required();
  parse->add_option("--input", input_path, "Sentences, one per line, tokens word/POS")
      ->required();
  parse->add_option("--format", format, "Output format")
      ->check(CLI::IsMember({"brackets", "conll"}));

  CLI::App* eval = app.add_subcommand("eval", "Score a checkpoint against a gold treebank");
  eval->add_option("--model", model_path, "Checkpoint to load")->required();
  eval->add_option("--trees", trees, "Gold bracketed trees")->required();
  eval->add_option("--deps", deps, "Gold dependency TSV")->required();
  eval->add_option("--punct", punct_tags, "POS tags excluded from attachment scores");

  CLI::App* inspect = app.add_subcommand("inspect-heads", "Trace per-head span attributions");
  inspect->add_option("--model", model_path, "Checkpoint to load")->required();
  inspect->add_option("--trees", trees, "Gold bracketed trees")->required();
  inspect->add_option("--out-dir", out_dir, "Directory for traces.jsonl and CSV tables")
      ->required();
  inspect->add_option("--mode", mode_name, "Contribution mode")
      ->check(CLI::IsMember({"l1_average", "softmax"}));

  CLI::App* ablate = app.add_subcommand("ablate", "Train the ablation grid and print tables");
  ablate->add_option("--config", config_path, "JSON training config")->required();
  ablate->add_option("--trees", trees, "Training trees (default: generated toy corpus)");
  ablate->add_option("--deps", deps, "Training dependencies");
  ablate->add_option("--toy-size", toy_size, "Generated corpus size when no files are given");

  CLI::App* sweep = app.add_subcommand("sweep-layers", "Train once per self-attention depth");
  sweep->add_option("--config", config_path, "JSON training config")->required();
  sweep->add_option("--layers", layers, "Comma-separated layer counts")
      ->required()
      ->delimiter(',');
  sweep->add_option("--trees", trees, "Training trees (default: generated toy corpus)");
  sweep->add_option("--deps", deps, "Training dependencies");
  sweep->add_option("--toy-size", toy_size, "Generated corpus size when no files are given");

  CLI::App* gen = app.add_subcommand("gen-toy", "Generate a toy treebank");
  gen->add_option("--seed", seed, "Corpus seed");
  gen->add_option("--size", size, "Number of sentences");
  gen->add_option("--out-dir", out_dir, "Directory for toy.trees and toy.deps")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (app.got_subcommand(train)) return cmd_train(trees, deps, config_path, out_path);
    if (app.got_subcommand(parse)) return cmd_parse(model_path, input_path, format);
    if (app.got_subcommand(eval)) return cmd_eval(model_path, trees, deps, punct_tags);
    if (app.got_subcommand(inspect)) return cmd_inspect(model_path, trees, out_dir, mode_name);
    if (app.got_subcommand(ablate)) return cmd_ablate(config_path, trees, deps, toy_size);
    if (app.got_subcommand(sweep)) return cmd_sweep(config_path, layers, trees, deps, toy_size);
    if (app.got_subcommand(gen)) return cmd_gen_toy(seed, size, out_dir);
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
