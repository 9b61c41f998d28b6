// lipfit command line. Talks to the library only through the C interface.

#include "lipfit/lipfit.h"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

using nlohmann::json;

namespace {

constexpr const char* kSchema = "lipfit.experiment/1";

// Process exit codes.
constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitIo = 4;

int exit_code(lf_status s) {
  switch (s) {
    case LF_OK: return kExitOk;
    case LF_ERR_CONFIG:
    case LF_ERR_ARGUMENT: return kExitConfig;
    case LF_ERR_DIVERGENCE: return kExitDivergence;
    case LF_ERR_IO: return kExitIo;
    default: return kExitFailure;
  }
}

struct Failure {
  int code;
};

void check(lf_status s) {
  if (s == LF_OK) return;
  std::fprintf(stderr, "lipfit: %s error: %s\n", lf_status_name(s), lf_last_error());
  throw Failure{exit_code(s)};
}

[[noreturn]] void usage_error(const std::string& msg) {
  std::fprintf(stderr, "lipfit: %s\n", msg.c_str());
  throw Failure{kExitConfig};
}

// Takes ownership of a string returned by the library.
std::string take(char* s) {
  std::string out = s ? s : "";
  lf_free_string(s);
  return out;
}

struct DatasetPtr {
  lf_dataset* p = nullptr;
  ~DatasetPtr() { lf_dataset_free(p); }
};
struct ModelPtr {
  lf_model* p = nullptr;
  ~ModelPtr() { lf_model_free(p); }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::fprintf(stderr, "lipfit: io error: cannot open %s\n", path.c_str());
    throw Failure{kExitIo};
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Experiment config assembled from an optional file plus flag overrides.
struct ConfigArgs {
  std::string file;
  std::vector<std::string> sets;  // pointer=value pairs
  std::optional<std::string> output;
  std::optional<std::uint64_t> data_seed, test_seed, model_seed, train_seed, eval_seed, sim_seed;
  std::optional<std::string> model, layer, activation, formulation;
  std::optional<int> width, depth, outer_iters, inner_steps, restarts;
  std::optional<double> rho, rho_factor, lr, weight_decay, noise;

  void add_to(CLI::App* app) {
    app->add_option("-c,--config", file, "experiment config (JSON)");
    app->add_option("--set", sets, "override a field, e.g. --set training.lr=0.002");
    app->add_option("-o,--output", output, "output directory");
    app->add_option("--data-seed", data_seed, "training data sampling seed");
    app->add_option("--test-seed", test_seed, "test data sampling seed");
    app->add_option("--model-seed", model_seed, "parameter initialization seed");
    app->add_option("--train-seed", train_seed, "training seed");
    app->add_option("--eval-seed", eval_seed, "empirical Lipschitz search seed");
    app->add_option("--sim-seed", sim_seed, "initial condition seed");
    app->add_option("--model", model, "lipnet or mlp")->check(CLI::IsMember({"lipnet", "mlp"}));
    app->add_option("--layer", layer, "sandwich, orthogonal or spectral");
    app->add_option("--activation", activation, "relu or tanh");
    app->add_option("--width", width, "hidden width");
    app->add_option("--depth", depth, "number of layers");
    app->add_option("--formulation", formulation, "P1, P2 or P3");
    app->add_option("--rho", rho, "Lipschitz slack (absolute)");
    app->add_option("--rho-factor", rho_factor, "Lipschitz slack as a multiple of L_data");
    app->add_option("--outer-iters", outer_iters, "augmented Lagrangian rounds");
    app->add_option("--inner-steps", inner_steps, "Adam steps per round");
    app->add_option("--restarts", restarts, "independent initializations (best kept)");
    app->add_option("--lr", lr, "learning rate");
    app->add_option("--weight-decay", weight_decay, "MLP weight decay");
    app->add_option("--noise", noise, "measurement noise bound");
  }

  // Returns (text, source) ready for the library.
  std::pair<std::string, std::string> build() const {
    json j = {{"schema", kSchema}};
    std::string source = "<defaults>";
    if (!file.empty()) {
      const std::string text = read_file(file);
      // Validate the file alone first so messages point at its lines.
      char* norm = nullptr;
      check(lf_config_check(text.c_str(), file.c_str(), &norm));
      lf_free_string(norm);
      j = json::parse(text);
      source = file;
    }
    const json original = j;
    auto put = [&](const char* ptr, const json& v) { j[json::json_pointer(ptr)] = v; };
    if (output) put("/output", *output);
    if (data_seed) put("/dataset/seed", *data_seed);
    if (test_seed) put("/dataset/test_seed", *test_seed);
    if (noise) put("/dataset/noise", *noise);
    if (model_seed) put("/model/seed", *model_seed);
    if (model) put("/model/type", *model);
    if (layer) put("/model/layer", *layer);
    if (activation) put("/model/activation", *activation);
    if (width) put("/model/width", *width);
    if (depth) put("/model/depth", *depth);
    if (formulation) put("/formulation/kind", *formulation);
    if (rho) put("/formulation/rho", *rho);
    if (rho_factor) put("/formulation/rho_factor", *rho_factor);
    if (train_seed) put("/training/seed", *train_seed);
    if (outer_iters) put("/training/outer_iters", *outer_iters);
    if (inner_steps) put("/training/inner_steps", *inner_steps);
    if (restarts) put("/training/restarts", *restarts);
    if (lr) put("/training/lr", *lr);
    if (weight_decay) put("/training/weight_decay", *weight_decay);
    if (eval_seed) put("/evaluation/seed", *eval_seed);
    if (sim_seed) put("/simulation/seed", *sim_seed);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos || eq == 0) usage_error("--set expects path=value, got '" + s + "'");
      std::string path = s.substr(0, eq);
      for (auto& ch : path)
        if (ch == '.') ch = '/';
      const std::string raw = s.substr(eq + 1);
      json v;
      try {
        v = json::parse(raw);
      } catch (const json::parse_error&) {
        v = raw;  // bare strings
      }
      put(("/" + path).c_str(), v);
    }
    if (j == original && !file.empty()) return {read_file(file), source};
    return {j.dump(2), file.empty() ? source : file + " (with overrides)"};
  }
};

void print_json(const std::string& s) { std::printf("%s\n", s.c_str()); }

std::vector<double> parse_point(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      v.push_back(std::stod(tok));
    } catch (const std::exception&) {
      usage_error("bad coordinate '" + tok + "' in --x");
    }
  }
  return v;
}

int run(int argc, char** argv) {
  CLI::App app{"lipfit: Lipschitz-minimal interpolation with certified networks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(lf_version()));

  // gen-data
  ConfigArgs gen_cfg;
  auto* gen = app.add_subcommand("gen-data", "sample training and test data from the benchmark system");
  gen_cfg.add_to(gen);

  // train
  ConfigArgs train_cfg;
  std::string run_name;
  auto* train = app.add_subcommand("train", "train one model and write its checkpoint and report");
  train_cfg.add_to(train);
  train->add_option("--name", run_name, "run name (default derived from the config)");

  // eval
  std::string eval_model, eval_train, eval_data, eval_x;
  auto* eval = app.add_subcommand("eval", "score a model on a dataset or evaluate it at a point");
  eval->add_option("--model", eval_model, "checkpoint path or 'mcshane'")->required();
  eval->add_option("--train", eval_train, "training CSV (required for mcshane)");
  eval->add_option("--data", eval_data, "dataset CSV to score against");
  eval->add_option("--x", eval_x, "comma separated input point");

  // bounds
  std::optional<double> b_lg;
  double b_ldata = 0, b_lf = 0, b_h = 0, b_epsbar = 0, b_eps = 0, b_rho = 0, b_N = 1, b_delta = 0.1, b_k1 = 1,
         b_k2 = 1;
  int b_n = 1;
  std::string b_inputs;
  int cal_n = 0, cal_trials = 50;
  std::vector<std::int64_t> cal_sizes{100, 300, 1000, 3000, 10000};
  std::uint64_t cal_seed = 7;
  auto* bounds = app.add_subcommand("bounds", "generalization bound report, or calibration of its constants");
  bounds->add_option("--inputs", b_inputs, "JSON file with bound inputs");
  bounds->add_option("--l-g", b_lg, "Lipschitz constant of the target (default: L_data proxy)");
  bounds->add_option("--l-data", b_ldata, "data Lipschitz constant");
  bounds->add_option("--l-f", b_lf, "Lipschitz constant of the learned map");
  bounds->add_option("--covering-radius", b_h, "covering radius h");
  bounds->add_option("--eps-bar", b_epsbar, "measurement noise bound");
  bounds->add_option("--eps", b_eps, "training Max error");
  bounds->add_option("--rho", b_rho, "Lipschitz slack");
  bounds->add_option("--n", b_n, "input dimension");
  bounds->add_option("-N,--samples", b_N, "sample count");
  bounds->add_option("--delta", b_delta, "failure probability");
  bounds->add_option("--k1", b_k1, "radius constant k1");
  bounds->add_option("--k2", b_k2, "radius constant k2");
  bounds->add_option("--calibrate", cal_n, "calibrate k1, k2 for this input dimension instead");
  bounds->add_option("--sizes", cal_sizes, "calibration sample sizes (comma separated)")->delimiter(',');
  bounds->add_option("--trials", cal_trials, "calibration trials per size");
  bounds->add_option("--seed", cal_seed, "calibration seed");

  // simulate
  ConfigArgs sim_cfg;
  std::vector<std::string> sim_ckpts, sim_labels;
  std::string sim_out;
  auto* sim = app.add_subcommand("simulate", "integrate learned and true dynamics from shared initial conditions");
  sim_cfg.add_to(sim);
  sim->add_option("--checkpoint", sim_ckpts, "checkpoint(s) to simulate")->required();
  sim->add_option("--label", sim_labels, "label per checkpoint");
  sim->add_option("--out", sim_out, "output directory (default <output>/simulation)");

  // report
  std::string report_dir;
  auto* report = app.add_subcommand("report", "collect run reports into tables and plots");
  report->add_option("run_dir", report_dir, "experiment output directory")->required();

  // info
  std::string info_path;
  auto* info = app.add_subcommand("info", "describe a checkpoint");
  info->add_option("checkpoint", info_path, "checkpoint path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  if (gen->parsed()) {
    const auto [text, source] = gen_cfg.build();
    char* out = nullptr;
    check(lf_gen_data(text.c_str(), source.c_str(), &out));
    print_json(take(out));
    return kExitOk;
  }

  if (train->parsed()) {
    const auto [text, source] = train_cfg.build();
    char* out = nullptr;
    check(lf_train(text.c_str(), source.c_str(), run_name.c_str(), &out));
    const json r = json::parse(take(out));
    const auto& t = r.at("training");
    const auto& m = r.at("metrics");
    std::fprintf(stderr, "%s: %s, train max %.3e, test mse %.3e\n", r.at("name").get<std::string>().c_str(),
                 t.at("status").get<std::string>().c_str(), t.at("train_max").get<double>(),
                 m.at("test_mse").get<double>());
    print_json(r.dump(2));
    return kExitOk;
  }

  if (eval->parsed()) {
    ModelPtr model;
    DatasetPtr train_ds;
    if (eval_model == "mcshane") {
      if (eval_train.empty()) usage_error("--model mcshane needs --train");
      check(lf_dataset_load(eval_train.c_str(), &train_ds.p));
      check(lf_model_mcshane(train_ds.p, &model.p));
    } else {
      check(lf_model_load(eval_model.c_str(), &model.p));
    }
    if (eval_data.empty() && eval_x.empty()) usage_error("eval needs --data or --x");
    json result;
    double cert = 0;
    int has = 0;
    check(lf_model_certificate(model.p, &cert, &has));
    result["certified_lipschitz"] = has ? json(cert) : json(nullptr);
    if (!eval_data.empty()) {
      DatasetPtr ds;
      check(lf_dataset_load(eval_data.c_str(), &ds.p));
      char* out = nullptr;
      check(lf_model_score(model.p, ds.p, &out));
      result["score"] = json::parse(take(out));
    }
    if (!eval_x.empty()) {
      std::int64_t n = 0, m = 0;
      check(lf_model_dims(model.p, &n, &m));
      const auto x = parse_point(eval_x);
      if (static_cast<std::int64_t>(x.size()) != n)
        usage_error("--x has " + std::to_string(x.size()) + " coordinates, model expects " + std::to_string(n));
      std::vector<double> y(static_cast<std::size_t>(m));
      check(lf_model_eval(model.p, x.data(), 1, y.data()));
      result["x"] = x;
      result["y"] = y;
    }
    print_json(result.dump(2));
    return kExitOk;
  }

  if (bounds->parsed()) {
    char* out = nullptr;
    if (cal_n > 0) {
      check(lf_calibrate(cal_n, cal_sizes.data(), static_cast<std::int64_t>(cal_sizes.size()), cal_trials, b_delta,
                         cal_seed, &out));
      print_json(take(out));
      return kExitOk;
    }
    json in;
    if (!b_inputs.empty()) {
      try {
        in = json::parse(read_file(b_inputs));
      } catch (const json::parse_error& e) {
        usage_error(b_inputs + ": " + e.what());
      }
    }
    auto set = [&](const char* key, const char* flag, const json& v) {
      if (bounds->count(flag) > 0 || !in.contains(key)) in[key] = v;
    };
    set("l_data", "--l-data", b_ldata);
    set("l_f", "--l-f", b_lf);
    set("h", "--covering-radius", b_h);
    set("eps_bar", "--eps-bar", b_epsbar);
    set("eps", "--eps", b_eps);
    set("rho", "--rho", b_rho);
    set("n", "--n", b_n);
    set("N", "--samples", b_N);
    set("delta", "--delta", b_delta);
    set("k1", "--k1", b_k1);
    set("k2", "--k2", b_k2);
    if (b_lg) in["l_g"] = *b_lg;
    check(lf_bounds(in.dump().c_str(), &out));
    print_json(take(out));
    return kExitOk;
  }

  if (sim->parsed()) {
    if (!sim_labels.empty() && sim_labels.size() != sim_ckpts.size())
      usage_error("--label must be given once per --checkpoint");
    const auto [text, source] = sim_cfg.build();
    if (sim_out.empty()) sim_out = (json::parse(text).value("output", std::string("run"))) + "/simulation";
    std::vector<const char*> paths, labels;
    for (const auto& p : sim_ckpts) paths.push_back(p.c_str());
    for (const auto& l : sim_labels) labels.push_back(l.c_str());
    char* out = nullptr;
    check(lf_simulate(text.c_str(), source.c_str(), paths.data(), labels.empty() ? nullptr : labels.data(),
                      static_cast<std::int64_t>(paths.size()), sim_out.c_str(), &out));
    print_json(take(out));
    return kExitOk;
  }

  if (report->parsed()) {
    char* out = nullptr;
    check(lf_report(report_dir.c_str(), &out));
    const json r = json::parse(take(out));
    if (r.at("runs").get<long>() == 0) std::fprintf(stderr, "lipfit: warning: no run reports under %s\n", report_dir.c_str());
    for (const auto& m : r.at("missing")) std::fprintf(stderr, "lipfit: warning: missing report: %s\n", m.get<std::string>().c_str());
    print_json(r.dump(2));
    return kExitOk;
  }

  if (info->parsed()) {
    ModelPtr model;
    check(lf_model_load(info_path.c_str(), &model.p));
    char* out = nullptr;
    check(lf_model_info(model.p, &out));
    print_json(take(out));
    return kExitOk;
  }
  return kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Failure& f) {
    return f.code;
  } catch (const json::exception& e) {
    std::fprintf(stderr, "lipfit: config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "lipfit: %s\n", e.what());
    return kExitFailure;
  }
}
