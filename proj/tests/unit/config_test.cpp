#include <sstream>
#include <string>

#include <doctest.h>

#include "lap/config.hpp"

using namespace lap;

namespace {

std::string kFullConfig = R"({
  "epochs": 12,
  "batch_size": 4,
  "learning_rate": 0.01,
  "optimizer": "sgd",
  "seed": 99,
  "punct_tags": ["PUNCT", "."],
  "checkpoint": "out.ckpt",
  "eval_every": 3,
  "stop_f1": 95.0,
  "stop_uas": 94.0,
  "stop_las": 93.0,
  "model": {
    "span_hidden": 7,
    "dep_rank": 5,
    "encoder": {
      "num_layers": 2,
      "d_content": 6,
      "d_position": 4,
      "max_len": 16,
      "sa_heads": 2,
      "lal": {
        "num_heads": 3,
        "d_model": 10,
        "d_qk": 4,
        "d_v": 4,
        "d_out": 4,
        "use_pfl": false,
        "residual_dropout": 0.25,
        "query_mode": "matrix",
        "combine_mode": "project"
      }
    }
  }
})";

TrainConfig parse_text(const std::string& text) {
  std::istringstream in(text);
  return parse_train_config(in, "test");
}

}  // namespace

TEST_CASE("full config parses every field") {
  TrainConfig c = parse_text(kFullConfig);
  CHECK(c.epochs == 12);
  CHECK(c.batch_size == 4);
  CHECK(c.learning_rate == 0.01);
  CHECK(c.optimizer == "sgd");
  CHECK(c.seed == 99);
  CHECK(c.punct_tags == std::vector<std::string>{"PUNCT", "."});
  CHECK(c.checkpoint == "out.ckpt");
  CHECK(c.eval_every == 3);
  CHECK(c.stop_f1 == 95.0);
  CHECK(c.stop_uas == 94.0);
  CHECK(c.stop_las == 93.0);
  CHECK(c.model.span_hidden == 7);
  CHECK(c.model.dep_rank == 5);
  CHECK(c.model.encoder.num_layers == 2);
  CHECK(c.model.encoder.d_content == 6);
  CHECK(c.model.encoder.d_position == 4);
  CHECK(c.model.encoder.max_len == 16);
  CHECK(c.model.encoder.sa_heads == 2);
  CHECK(c.model.encoder.lal.num_heads == 3);
  CHECK(c.model.encoder.lal.d_model == 10);
  CHECK(c.model.encoder.lal.d_qk == 4);
  CHECK(c.model.encoder.lal.d_v == 4);
  CHECK(c.model.encoder.lal.d_out == 4);
  CHECK(c.model.encoder.lal.use_pfl == false);
  CHECK(c.model.encoder.lal.residual_dropout_p == 0.25);
  CHECK(c.model.encoder.lal.query_mode == QueryMode::kMatrix);
  CHECK(c.model.encoder.lal.combine_mode == CombineMode::kProject);
}

TEST_CASE("serialization round trips") {
  TrainConfig c = parse_text(kFullConfig);
  TrainConfig back = parse_text(train_config_json(c));
  CHECK(back.epochs == c.epochs);
  CHECK(back.batch_size == c.batch_size);
  CHECK(back.learning_rate == c.learning_rate);
  CHECK(back.optimizer == c.optimizer);
  CHECK(back.seed == c.seed);
  CHECK(back.punct_tags == c.punct_tags);
  CHECK(back.checkpoint == c.checkpoint);
  CHECK(back.eval_every == c.eval_every);
  CHECK(back.stop_f1 == c.stop_f1);
  CHECK(back.model.span_hidden == c.model.span_hidden);
  CHECK(back.model.encoder.num_layers == c.model.encoder.num_layers);
  CHECK(back.model.encoder.lal.residual_dropout_p == c.model.encoder.lal.residual_dropout_p);
  CHECK(back.model.encoder.lal.query_mode == c.model.encoder.lal.query_mode);
  CHECK(back.model.encoder.lal.combine_mode == c.model.encoder.lal.combine_mode);
}

TEST_CASE("omitted fields keep defaults") {
  TrainConfig c = parse_text(R"({
    "model": {"encoder": {"d_content": 6, "d_position": 4, "sa_heads": 2,
                          "lal": {"num_heads": 2, "d_model": 10, "d_qk": 4, "d_v": 4, "d_out": 4}}}
  })");
  CHECK(c.epochs == 50);
  CHECK(c.batch_size == 8);
  CHECK(c.learning_rate == 1e-3);
  CHECK(c.optimizer == "adam");
  CHECK(c.seed == 0);
  CHECK(c.punct_tags == std::vector<std::string>{"PUNCT"});
  CHECK(c.checkpoint.empty());
  CHECK(c.eval_every == 0);
  CHECK(c.stop_f1 == 100.0);
  CHECK(c.model.encoder.num_layers == 3);
  CHECK(c.model.encoder.lal.use_pfl == true);
  CHECK(c.model.encoder.lal.query_mode == QueryMode::kVector);
  CHECK(c.model.encoder.lal.combine_mode == CombineMode::kConcat);
}

TEST_CASE("unresolved head count loads as a valid config") {
  TrainConfig c = parse_text(R"({
    "model": {"encoder": {"d_content": 6, "d_position": 4, "sa_heads": 2,
                          "lal": {"num_heads": 0, "d_model": 10, "d_qk": 4, "d_v": 4, "d_out": 4}}}
  })");
  CHECK(c.model.encoder.lal.num_heads == 0);
}

TEST_CASE("bad configs are rejected with context") {
  SUBCASE("malformed json") {
    CHECK_THROWS_WITH_AS(parse_text("{"), doctest::Contains("test:"), InputError);
  }
  SUBCASE("unknown key") {
    CHECK_THROWS_WITH_AS(parse_text(R"({"epoch": 3})"),
                         doctest::Contains("unknown key \"epoch\""), InputError);
  }
  SUBCASE("unknown nested key") {
    CHECK_THROWS_WITH_AS(
        parse_text(R"({"model": {"encoder": {"lal": {"heads": 2}}}})"),
        doctest::Contains("model.encoder.lal"), InputError);
  }
  SUBCASE("negative integer") {
    CHECK_THROWS_WITH_AS(parse_text(R"({"epochs": -3})"),
                         doctest::Contains("non-negative integer"), InputError);
  }
  SUBCASE("wrong type") {
    CHECK_THROWS_WITH_AS(parse_text(R"({"learning_rate": "fast"})"),
                         doctest::Contains("must be a number"), InputError);
  }
  SUBCASE("bad enum value") {
    CHECK_THROWS_WITH_AS(
        parse_text(
            R"({"model": {"encoder": {"lal": {"query_mode": "diagonal"}}}})"),
        doctest::Contains("\"vector\" or \"matrix\""), InputError);
  }
  SUBCASE("bad punct list") {
    CHECK_THROWS_WITH_AS(parse_text(R"({"punct_tags": [1, 2]})"),
                         doctest::Contains("array of strings"), InputError);
  }
  SUBCASE("bad optimizer") {
    std::string text = kFullConfig;
    text.replace(text.find("\"sgd\""), 5, "\"rmsprop\"");
    CHECK_THROWS_WITH_AS(parse_text(text), doctest::Contains("optimizer"), InputError);
  }
  SUBCASE("zero epochs") {
    std::string text = kFullConfig;
    text.replace(text.find("\"epochs\": 12"), 12, "\"epochs\": 0");
    CHECK_THROWS_WITH_AS(parse_text(text), doctest::Contains("epochs"), InputError);
  }
  SUBCASE("missing model dimensions") {
    CHECK_THROWS(parse_text(R"({"epochs": 3})"));
  }
}

TEST_CASE("missing config file is an input error") {
  CHECK_THROWS_WITH_AS(load_train_config("/nonexistent/config.json"),
                       doctest::Contains("cannot open"), InputError);
}
