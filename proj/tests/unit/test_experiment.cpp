#include "doctest.h"

#include "lipfit/error.hpp"
#include "lipfit/experiment.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace lipfit;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lipfit_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string config_error(const std::string& text) {
  try {
    ExperimentConfig::parse(text, "cfg.json");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
    return e.what();
  }
  FAIL("expected a config error");
  return "";
}

ExperimentConfig micro(const fs::path& out) {
  ExperimentConfig c = ExperimentConfig::load(fs::path(LIPFIT_FIXTURES) / "micro.json");
  c.output = out;
  return c;
}

}  // namespace

TEST_CASE("config defaults and round-trip") {
  const ExperimentConfig c = ExperimentConfig::parse(R"({"schema":"lipfit.experiment/1"})");
  CHECK(c.dataset.grid_per_dim == 3);
  CHECK(c.dataset.uniform == 500);
  CHECK(c.dataset.test == 10000);
  CHECK(c.domain.lower() == std::vector<double>{-2.0, -10.0, -2.0});
  CHECK(c.model.type == "lipnet");
  CHECK(c.formulation.kind == Problem::P1);
  const auto j = c.to_json();
  CHECK(ExperimentConfig::from_json(j).to_json() == j);
  CHECK(ExperimentConfig::parse(j.dump(2)).to_json() == j);
}

TEST_CASE("config errors name the line") {
  CHECK(config_error("{\n  \"schema\": \"lipfit.experiment/1\",\n  \"model\": {\n    \"widht\": 16\n  }\n}") ==
        "cfg.json:4: /model/widht: unknown key");
  CHECK(config_error("{\n\"schema\": \"lipfit.experiment/1\",\n\"training\": {\"lr\": -1}\n}")
            .rfind("cfg.json:3: /training/lr", 0) == 0);
  CHECK(config_error("{\n\"schema\": \"lipfit.experiment/1\",\n\n\"model\": {\"depth\": \"two\"}}")
            .rfind("cfg.json:4: /model/depth: wrong type", 0) == 0);
  CHECK(config_error(R"({"schema":"other/2"})").find("/schema") != std::string::npos);
  CHECK(config_error("{ \"schema\": ").find("cfg.json") != std::string::npos);
  CHECK(config_error(R"({"schema":"lipfit.experiment/1","formulation":{"kind":"P2","rho":1,"rho_factor":0.1}})")
            .find("not both") != std::string::npos);
  CHECK(config_error(R"({"schema":"lipfit.experiment/1","model":{"activation":"gelu"}})")
            .find("/model/activation") != std::string::npos);
  try {
    ExperimentConfig::load(fs::path(LIPFIT_FIXTURES) / "bad_key.json");
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("bad_key.json:4: /model/widht") != std::string::npos);
  }
  try {
    ExperimentConfig::load("/nonexistent/cfg.json");
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Io);
  }
}

TEST_CASE("rho resolution and run names") {
  ExperimentConfig c;
  CHECK(default_run_name(c) == "lipnet-sandwich-P1");
  c.formulation.kind = Problem::P3;
  c.formulation.rho_factor = 0.1;
  CHECK(c.formulation.resolve(4.0) == doctest::Approx(0.4));
  CHECK(default_run_name(c) == "lipnet-sandwich-P3-rf0.1");
  c.formulation.rho_factor.reset();
  CHECK(c.formulation.resolve(4.0) == 0.0);
  CHECK(default_run_name(c) == "lipnet-sandwich-P3-rho0");
  c.model.type = "mlp";
  c.training.weight_decay = 0.01;
  CHECK(default_run_name(c) == "mlp-wd0.01");
}

TEST_CASE("benchmark data generation") {
  ExperimentConfig c;
  c.output = temp_dir("gen");
  const DataManifest m = generate_data(c);
  CHECK(m.n_train == 527);
  CHECK(m.n_test == 10000);
  CHECK(m.l_data >= 4.0);
  CHECK(m.l_data <= 5.0);
  CHECK(m.covering.radius > 0.0);
  const auto j = nlohmann::json::parse(slurp(c.output / "manifest.json"));
  CHECK(j.at("n_train") == 527);
  CHECK(j.at("l_data").get<double>() == m.l_data);

  const std::string train = slurp(c.output / "train.csv"), test = slurp(c.output / "test.csv");
  const std::string manifest = slurp(c.output / "manifest.json");
  generate_data(c);
  CHECK(slurp(c.output / "train.csv") == train);
  CHECK(slurp(c.output / "test.csv") == test);
  CHECK(slurp(c.output / "manifest.json") == manifest);

  c.domain = Domain({0.0, 0.0}, {1.0, 1.0});
  CHECK_THROWS_AS(generate_data(c), Error);
}

TEST_CASE("P3 with zero slack certifies the data constant") {
  const ExperimentConfig base = micro(temp_dir("p3"));
  const DataManifest m = generate_data(base);
  ExperimentConfig c = base;
  c.formulation.kind = Problem::P3;
  c.formulation.rho = 0.0;
  const RunResult r = train_run(c);
  CHECK(r.name == "lipnet-sandwich-P3-rho0");
  CHECK(r.metrics.certified_lipschitz.value() == doctest::Approx(m.l_data).epsilon(1e-14));
  CHECK(r.metrics.empirical_lipschitz <= r.metrics.certified_lipschitz.value() * (1 + 1e-9));
  CHECK(fs::exists(c.output / "runs" / r.name / "checkpoint.json"));
  const auto rep = nlohmann::json::parse(slurp(c.output / "runs" / r.name / "report.json"));
  CHECK(rep.at("config") == c.to_json());
}

TEST_CASE("report tables and figure") {
  const fs::path dir = temp_dir("report");
  ReportSummary empty = build_report(dir);
  CHECK(empty.runs == 0);
  std::istringstream golden(slurp(fs::path(LIPFIT_FIXTURES) / "table_headers.csv"));
  std::string line;
  for (const char* file : {"table1.csv", "table2.csv", "table3.csv"}) {
    std::getline(golden, line);
    CHECK(slurp(dir / file) == line + "\n");
  }
  CHECK_THROWS_AS(build_report(dir / "absent"), Error);

  ExperimentConfig c = micro(dir);
  generate_data(c);
  c.training.outer_iters = 1;
  c.training.inner_steps = 20;
  train_run(c);
  c.model.type = "mlp";
  for (double wd : {0.1, 0.0}) {
    c.training.weight_decay = wd;
    train_run(c);
  }
  fs::create_directories(dir / "runs" / "broken");
  simulate_models(c, {dir / "runs/lipnet-sandwich-P1/checkpoint.json", dir / "runs/mlp-wd0/checkpoint.json"},
                  {"LipNet", "MLP"}, dir / "simulation");

  const ReportSummary s = build_report(dir);
  CHECK(s.runs == 3);
  CHECK(s.missing == std::vector<std::string>{"broken"});
  CHECK(s.files.size() == 4);
  const std::string t1 = slurp(dir / "table1.csv"), t2 = slurp(dir / "table2.csv");
  CHECK(std::count(t1.begin(), t1.end(), '\n') == 3);
  CHECK(t1.find("\nMLP,--,") != std::string::npos);
  CHECK(t1.find("\nLipNet-P1,--,") != std::string::npos);
  CHECK(t2.find("\n0,") < t2.find("\n0.1,"));
  const std::string svg = slurp(dir / "fig2.svg");
  std::size_t curves = 0;
  for (std::size_t pos = 0; (pos = svg.find("class=\"curve\"", pos)) != std::string::npos; ++pos) ++curves;
  CHECK(curves == 2);
}
