#include "lap/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <vector>

#include "lap/errors.hpp"
#include "json_util.hpp"

namespace lap {

namespace {

constexpr char kMagic[8] = {'L', 'A', 'P', 'C', 'K', 'P', 'T', '1'};

void write_u64(std::ostream& out, uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes, 8);
}

void write_f64(std::ostream& out, double v) { write_u64(out, std::bit_cast<uint64_t>(v)); }

uint64_t read_u64(std::istream& in, const std::string& source) {
  char bytes[8];
  if (!in.read(bytes, 8)) throw InputError(source + ": truncated checkpoint");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<uint64_t>(static_cast<unsigned char>(bytes[i])) << (8 * i);
  }
  return v;
}

double read_f64(std::istream& in, const std::string& source) {
  return std::bit_cast<double>(read_u64(in, source));
}

Vocab vocab_from_json(const nlohmann::json& j, const std::string& source) {
  if (!j.is_object()) throw InputError(source + ": vocab header must be an object");
  auto list = [&](const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_array()) {
      throw InputError(source + ": vocab header is missing the \"" + key + "\" list");
    }
    return it->get<std::vector<std::string>>();
  };
  Vocab seeded;
  Vocab vocab;
  for (const std::string& w : list("words")) vocab.add_word(w);
  for (const std::string& t : list("tags")) vocab.add_tag(t);
  for (const std::string& l : list("const_labels")) vocab.add_const_label(l);
  for (const std::string& l : list("dep_labels")) vocab.add_dep_label(l);
  if (vocab.num_words() < seeded.num_words() || vocab.word(0) != seeded.word(0) ||
      vocab.word(1) != seeded.word(1) || vocab.const_label(0) != seeded.const_label(0)) {
    throw InputError(source + ": vocab header lacks the reserved entries");
  }
  return vocab;
}

}  // namespace

void save_checkpoint(std::ostream& out, ParserModel& model) {
  nlohmann::json header{
      {"config", model_config_to_json(model.config)},
      {"vocab",
       {{"words", model.vocab.word_list()},
        {"tags", model.vocab.tag_list()},
        {"const_labels", model.vocab.const_label_list()},
        {"dep_labels", model.vocab.dep_label_list()}}},
  };
  std::string header_text = header.dump();

  out.write(kMagic, 8);
  write_u64(out, header_text.size());
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));

  std::vector<NamedParam> params;
  model.collect(params);
  for (const NamedParam& p : params) {
    const std::vector<double>& values = p.tensor.values();
    write_u64(out, values.size());
    for (double v : values) write_f64(out, v);
  }
  if (!out) throw InputError("checkpoint write failed");
}

void save_checkpoint(const std::string& path, ParserModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open checkpoint file " + path + " for writing");
  save_checkpoint(out, model);
}

ParserModel load_checkpoint(std::istream& in, const std::string& source) {
  char magic[8];
  if (!in.read(magic, 8) || !std::equal(magic, magic + 8, kMagic)) {
    throw InputError(source + ": not a parser checkpoint");
  }
  uint64_t header_len = read_u64(in, source);
  std::string header_text(header_len, '\0');
  if (!in.read(header_text.data(), static_cast<std::streamsize>(header_len))) {
    throw InputError(source + ": truncated checkpoint header");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(source + ": bad checkpoint header: " + e.what());
  }
  if (!header.contains("config") || !header.contains("vocab")) {
    throw InputError(source + ": checkpoint header is missing config or vocab");
  }

  ModelConfig config = model_config_from_json(header["config"], source);
  Vocab vocab = vocab_from_json(header["vocab"], source);
  ParserModel model = ParserModel::init(config, vocab, 0);

  std::vector<NamedParam> params;
  model.collect(params);
  for (NamedParam& p : params) {
    uint64_t count = read_u64(in, source);
    std::vector<double>& values = p.tensor.values_mut();
    if (count != values.size()) {
      throw InputError(source + ": parameter " + p.name + " has " + std::to_string(count) +
                       " values, expected " + std::to_string(values.size()));
    }
    for (double& v : values) v = read_f64(in, source);
  }
  in.peek();
  if (!in.eof()) throw InputError(source + ": trailing bytes after parameters");
  return model;
}

ParserModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint file " + path);
  return load_checkpoint(in, path);
}

}  // namespace lap
