#include "lap/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "lap/errors.hpp"
#include "json_util.hpp"

namespace lap {

namespace {

// Typed field extraction over one JSON object; every key must be consumed.
class ObjectReader {
 public:
  ObjectReader(const nlohmann::json& j, std::string path, const std::string& source)
      : json_(j), path_(std::move(path)), source_(source) {
    if (!json_.is_object()) fail("expected an object");
  }

  void get(const char* key, size_t& out) {
    const nlohmann::json* v = take(key);
    if (!v) return;
    if (!v->is_number_unsigned()) fail(std::string(key) + " must be a non-negative integer");
    out = v->get<size_t>();
  }

  void get(const char* key, double& out) {
    const nlohmann::json* v = take(key);
    if (!v) return;
    if (!v->is_number()) fail(std::string(key) + " must be a number");
    out = v->get<double>();
  }

  void get(const char* key, bool& out) {
    const nlohmann::json* v = take(key);
    if (!v) return;
    if (!v->is_boolean()) fail(std::string(key) + " must be a boolean");
    out = v->get<bool>();
  }

  void get(const char* key, std::string& out) {
    const nlohmann::json* v = take(key);
    if (!v) return;
    if (!v->is_string()) fail(std::string(key) + " must be a string");
    out = v->get<std::string>();
  }

  void get(const char* key, std::vector<std::string>& out) {
    const nlohmann::json* v = take(key);
    if (!v) return;
    if (!v->is_array()) fail(std::string(key) + " must be an array of strings");
    out.clear();
    for (const nlohmann::json& e : *v) {
      if (!e.is_string()) fail(std::string(key) + " must be an array of strings");
      out.push_back(e.get<std::string>());
    }
  }

  const nlohmann::json* object(const char* key) { return take(key); }

  void finish() {
    for (auto it = json_.begin(); it != json_.end(); ++it) {
      if (!consumed_.count(it.key())) fail("unknown key \"" + it.key() + "\"");
    }
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw InputError(source_ + ": " + path_ + ": " + what);
  }

  std::string child_path(const char* key) const { return path_ + "." + key; }

 private:
  const nlohmann::json* take(const char* key) {
    consumed_.insert(key);
    auto it = json_.find(key);
    return it == json_.end() ? nullptr : &*it;
  }

  const nlohmann::json& json_;
  std::string path_;
  const std::string& source_;
  std::set<std::string> consumed_;
};

LabelAttentionConfig lal_from_json(const nlohmann::json& j, const std::string& path,
                                   const std::string& source) {
  LabelAttentionConfig c;
  ObjectReader r(j, path, source);
  r.get("num_heads", c.num_heads);
  r.get("d_model", c.d_model);
  r.get("d_qk", c.d_qk);
  r.get("d_v", c.d_v);
  r.get("d_out", c.d_out);
  r.get("pfl_hidden", c.pfl_hidden);
  r.get("use_pfl", c.use_pfl);
  r.get("residual_dropout", c.residual_dropout_p);
  std::string query = to_string(c.query_mode);
  std::string combine = to_string(c.combine_mode);
  r.get("query_mode", query);
  r.get("combine_mode", combine);
  if (query == "vector") {
    c.query_mode = QueryMode::kVector;
  } else if (query == "matrix") {
    c.query_mode = QueryMode::kMatrix;
  } else {
    r.fail("query_mode must be \"vector\" or \"matrix\"");
  }
  if (combine == "concat") {
    c.combine_mode = CombineMode::kConcat;
  } else if (combine == "project") {
    c.combine_mode = CombineMode::kProject;
  } else {
    r.fail("combine_mode must be \"concat\" or \"project\"");
  }
  r.finish();
  return c;
}

nlohmann::json lal_to_json(const LabelAttentionConfig& c) {
  return nlohmann::json{
      {"num_heads", c.num_heads},
      {"d_model", c.d_model},
      {"d_qk", c.d_qk},
      {"d_v", c.d_v},
      {"d_out", c.d_out},
      {"pfl_hidden", c.pfl_hidden},
      {"use_pfl", c.use_pfl},
      {"residual_dropout", c.residual_dropout_p},
      {"query_mode", to_string(c.query_mode)},
      {"combine_mode", to_string(c.combine_mode)},
  };
}

EncoderConfig encoder_from_json(const nlohmann::json& j, const std::string& path,
                                const std::string& source) {
  EncoderConfig c;
  ObjectReader r(j, path, source);
  r.get("num_layers", c.num_layers);
  r.get("d_content", c.d_content);
  r.get("d_position", c.d_position);
  r.get("max_len", c.max_len);
  r.get("sa_heads", c.sa_heads);
  r.get("sa_pfl_hidden", c.sa_pfl_hidden);
  if (const nlohmann::json* lal = r.object("lal")) {
    c.lal = lal_from_json(*lal, r.child_path("lal"), source);
  }
  r.finish();
  return c;
}

nlohmann::json encoder_to_json(const EncoderConfig& c) {
  return nlohmann::json{
      {"num_layers", c.num_layers}, {"d_content", c.d_content},
      {"d_position", c.d_position}, {"max_len", c.max_len},
      {"sa_heads", c.sa_heads},     {"sa_pfl_hidden", c.sa_pfl_hidden},
      {"lal", lal_to_json(c.lal)},
  };
}

}  // namespace

nlohmann::json model_config_to_json(const ModelConfig& c) {
  return nlohmann::json{
      {"encoder", encoder_to_json(c.encoder)},
      {"span_hidden", c.span_hidden},
      {"dep_rank", c.dep_rank},
  };
}

ModelConfig model_config_from_json(const nlohmann::json& j, const std::string& source) {
  ModelConfig c;
  ObjectReader r(j, "model", source);
  if (const nlohmann::json* enc = r.object("encoder")) {
    c.encoder = encoder_from_json(*enc, r.child_path("encoder"), source);
  }
  r.get("span_hidden", c.span_hidden);
  r.get("dep_rank", c.dep_rank);
  r.finish();
  return c;
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return nlohmann::json{
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"learning_rate", c.learning_rate},
      {"optimizer", c.optimizer},
      {"seed", c.seed},
      {"model", model_config_to_json(c.model)},
      {"punct_tags", c.punct_tags},
      {"checkpoint", c.checkpoint},
      {"eval_every", c.eval_every},
      {"stop_f1", c.stop_f1},
      {"stop_uas", c.stop_uas},
      {"stop_las", c.stop_las},
  };
}

TrainConfig train_config_from_json(const nlohmann::json& j, const std::string& source) {
  TrainConfig c;
  ObjectReader r(j, "config", source);
  r.get("epochs", c.epochs);
  r.get("batch_size", c.batch_size);
  r.get("learning_rate", c.learning_rate);
  r.get("optimizer", c.optimizer);
  r.get("seed", c.seed);
  if (const nlohmann::json* model = r.object("model")) {
    c.model = model_config_from_json(*model, source);
  }
  r.get("punct_tags", c.punct_tags);
  r.get("checkpoint", c.checkpoint);
  r.get("eval_every", c.eval_every);
  r.get("stop_f1", c.stop_f1);
  r.get("stop_uas", c.stop_uas);
  r.get("stop_las", c.stop_las);
  r.finish();
  c.validate();
  return c;
}

void TrainConfig::validate() const {
  if (epochs == 0) throw InputError("epochs must be positive");
  if (batch_size == 0) throw InputError("batch_size must be positive");
  if (!(learning_rate >= 0.0)) throw InputError("learning_rate must be non-negative");
  if (optimizer != "adam" && optimizer != "sgd") {
    throw InputError("optimizer must be \"adam\" or \"sgd\", got \"" + optimizer + "\"");
  }
  model.validate();
}

TrainConfig parse_train_config(std::istream& in, const std::string& source) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(source + ": " + e.what());
  }
  return train_config_from_json(j, source);
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file " + path);
  return parse_train_config(in, path);
}

std::string train_config_json(const TrainConfig& config) {
  return train_config_to_json(config).dump(2) + "\n";
}

}  // namespace lap
