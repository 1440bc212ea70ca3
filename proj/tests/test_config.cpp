#include "doctest.h"

#include <random>

#include <json.hpp>

#include "dsca/config.hpp"

using namespace dsca;

TEST_CASE("config round-trips through serialization") {
  ExperimentConfig cfg = desk_default_config();
  cfg.run.variant = "half_rank";
  cfg.engine.loss_weights.lambda_sparse = 0.025;
  cfg.output_dir = "some/dir";
  std::string text = experiment_config_to_json(cfg);
  ExperimentConfig back = parse_experiment_config(text);
  CHECK(experiment_config_to_json(back) == text);
}

TEST_CASE("unknown keys are rejected with context") {
  try {
    parse_experiment_config(R"({"world": {"num_concepts": 4, "bogus_key": 1}})");
    FAIL("expected config_error");
  } catch (const config_error& e) {
    std::string msg = e.what();
    CHECK(msg.find("bogus_key") != std::string::npos);
    CHECK(msg.find("world") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_experiment_config(R"({"not_a_section": {}})"), config_error);
  CHECK_THROWS_AS(
      parse_experiment_config(R"({"engine": {"loss_weights": {"lambda_x": 1}}})"),
      config_error);
}

TEST_CASE("parse errors carry a line number") {
  std::string broken = "{\n  \"world\": {\n    \"dim\": oops\n  }\n}\n";
  try {
    parse_experiment_config(broken);
    FAIL("expected config_error");
  } catch (const config_error& e) {
    std::string msg = e.what();
    CHECK(msg.find("line 3") != std::string::npos);
  }
}

TEST_CASE("semantic validation") {
  CHECK_THROWS_AS(parse_experiment_config(R"({"engine": {"r": 999}})"), config_error);
  CHECK_THROWS_AS(parse_experiment_config(R"({"engine": {"tau": -1.0}})"),
                  config_error);
  CHECK_THROWS_AS(parse_experiment_config(R"({"run": {"variant": "nope"}})"),
                  config_error);
  CHECK_THROWS_AS(parse_experiment_config(R"({"run": {"edits_total": -5}})"),
                  config_error);
  // bottleneck above dim/4
  CHECK_THROWS_AS(
      parse_experiment_config(R"({"world": {"dim": 16}, "engine": {"r": 4, "bottleneck": 8}})"),
      config_error);
}

TEST_CASE("paper profile loads the published values") {
  ExperimentConfig cfg = desk_default_config();
  cfg.world.dim = 256;  // large enough for rank 128
  apply_paper_profile(cfg);
  CHECK(cfg.engine.r == 128);
  CHECK(cfg.engine.n_min == 32);
  CHECK(cfg.engine.n_refine == 500);
  CHECK(cfg.engine.tau == doctest::Approx(0.07));
  CHECK(cfg.engine.loss_weights.lambda_align == doctest::Approx(0.5));
  CHECK(cfg.engine.loss_weights.lambda_distill == doctest::Approx(1.0));
  CHECK(cfg.engine.loss_weights.lambda_sparse == doctest::Approx(1e-2));
  cfg.validate();  // n_min < r is allowed; activation defers instead

  SUBCASE("paper profile on a small world is rejected at validation") {
    ExperimentConfig small = desk_default_config();
    apply_paper_profile(small);  // dim stays 64 < r=128
    CHECK_THROWS_AS(small.validate(), config_error);
  }
}

TEST_CASE("doubles survive a JSON dump/parse round trip") {
  // Checkpoint exactness depends on this property of the JSON layer.
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> expo(-300.0, 300.0);
  for (int i = 0; i < 2000; ++i) {
    double v = g(rng) * std::pow(10.0, static_cast<int>(expo(rng)) / 15);
    nlohmann::json j = v;
    double back = nlohmann::json::parse(j.dump()).get<double>();
    CHECK(back == v);
  }
  for (double v : {0.0, -0.0, 1e-308, -1e308, 0.1, 1.0 / 3.0}) {
    nlohmann::json j = v;
    CHECK(nlohmann::json::parse(j.dump()).get<double>() == v);
  }
}
