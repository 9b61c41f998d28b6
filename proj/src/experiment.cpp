#include "lipfit/experiment.hpp"

#include "lipfit/error.hpp"
#include "lipfit/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace lipfit {

namespace fs = std::filesystem;

// --- config ---------------------------------------------------------------------

namespace {

// Semantic problem at a JSON pointer; parse() turns it into a line number.
struct FieldError {
  std::string pointer;
  std::string message;
};

class Reader {
 public:
  Reader(const nlohmann::json& j, std::string pointer) : j_(j), pointer_(std::move(pointer)) {
    if (!j_.is_object()) throw FieldError{pointer_, "expected an object"};
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw FieldError{pointer_ + "/" + key, "wrong type"};
    }
  }

  template <class T>
  void get_optional(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    T v{};
    get(key, v);
    out = v;
  }

  Reader child(const char* key) {
    seen_.insert(key);
    static const nlohmann::json empty = nlohmann::json::object();
    return Reader(j_.contains(key) ? j_.at(key) : empty, pointer_ + "/" + key);
  }

  bool has(const char* key) const { return j_.contains(key); }

  void check(bool ok, const char* key, const std::string& msg) const {
    if (!ok) throw FieldError{pointer_ + "/" + key, msg};
  }

  // Rejects keys that were never read (typos).
  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw FieldError{pointer_ + "/" + k, "unknown key"};
    }
  }

 private:
  const nlohmann::json& j_;
  std::string pointer_;
  std::set<std::string> seen_;
};

// Line of the last key in `pointer`, found by walking the keys in order.
int line_of(const std::string& text, const std::string& pointer) {
  std::size_t pos = 0;
  std::size_t start = 1;
  bool found_any = false;
  while (start <= pointer.size()) {
    std::size_t end = pointer.find('/', start);
    if (end == std::string::npos) end = pointer.size();
    const std::string key = "\"" + pointer.substr(start, end - start) + "\"";
    const std::size_t hit = text.find(key, pos);
    if (hit == std::string::npos) break;
    pos = hit;
    found_any = true;
    start = end + 1;
  }
  if (!found_any) return 1;
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

ExperimentConfig read_config(const nlohmann::json& j) {
  ExperimentConfig c;
  Reader root(j, "");
  std::string schema;
  root.get("schema", schema);
  root.check(schema == kExperimentSchema, "schema", "expected \"" + std::string(kExperimentSchema) + "\"");

  {
    Reader d = root.child("domain");
    std::vector<double> lo = c.domain.lower(), hi = c.domain.upper();
    d.get("lower", lo);
    d.get("upper", hi);
    d.check(lo.size() == hi.size() && !lo.empty(), "upper", "lower and upper must have equal nonzero length");
    for (std::size_t i = 0; i < lo.size(); ++i) d.check(lo[i] < hi[i], "upper", "need lower < upper on every axis");
    d.finish();
    c.domain = Domain(lo, hi);
  }
  {
    Reader d = root.child("dataset");
    d.get("grid_per_dim", c.dataset.grid_per_dim);
    d.get("uniform", c.dataset.uniform);
    d.get("noise", c.dataset.noise);
    d.get("seed", c.dataset.seed);
    d.get("test", c.dataset.test);
    d.get("test_seed", c.dataset.test_seed);
    d.get("covering_resolution", c.dataset.covering_resolution);
    d.check(c.dataset.grid_per_dim == 0 || c.dataset.grid_per_dim >= 2, "grid_per_dim", "must be 0 or >= 2");
    d.check(c.dataset.uniform >= 0, "uniform", "must be >= 0");
    d.check(c.dataset.noise >= 0.0, "noise", "must be >= 0");
    d.check(c.dataset.test >= 1, "test", "must be >= 1");
    d.check(c.dataset.covering_resolution >= 1, "covering_resolution", "must be >= 1");
    d.finish();
  }
  {
    Reader m = root.child("model");
    std::string activation = to_string(c.model.arch.activation), layer = to_string(c.model.arch.layer);
    m.get("type", c.model.type);
    m.get("width", c.model.arch.width);
    m.get("depth", c.model.arch.depth);
    m.get("activation", activation);
    m.get("layer", layer);
    m.get("seed", c.model.seed);
    m.get("psi_offset", c.model.psi_offset);
    m.check(c.model.type == "lipnet" || c.model.type == "mlp", "type", "expected \"lipnet\" or \"mlp\"");
    m.check(c.model.arch.width >= 1, "width", "must be >= 1");
    m.check(c.model.arch.depth >= 0, "depth", "must be >= 0");
    m.check(std::isfinite(c.model.psi_offset), "psi_offset", "must be finite");
    try {
      c.model.arch.activation = activation_from_string(activation);
    } catch (const Error& e) {
      throw FieldError{"/model/activation", e.what()};
    }
    try {
      c.model.arch.layer = layer_kind_from_string(layer);
    } catch (const Error& e) {
      throw FieldError{"/model/layer", e.what()};
    }
    m.finish();
  }
  {
    Reader f = root.child("formulation");
    std::string kind = to_string(c.formulation.kind);
    f.get("kind", kind);
    try {
      c.formulation.kind = problem_from_string(kind);
    } catch (const Error& e) {
      throw FieldError{"/formulation/kind", e.what()};
    }
    f.get_optional("rho", c.formulation.rho);
    f.get_optional("rho_factor", c.formulation.rho_factor);
    f.check(!(c.formulation.rho && c.formulation.rho_factor), "rho_factor", "give rho or rho_factor, not both");
    if (c.formulation.rho) f.check(*c.formulation.rho >= 0.0, "rho", "must be >= 0");
    if (c.formulation.rho_factor) f.check(*c.formulation.rho_factor >= 0.0, "rho_factor", "must be >= 0");
    f.finish();
  }
  {
    Reader t = root.child("training");
    TrainConfig& tc = c.training;
    t.get("outer_iters", tc.outer_iters);
    t.get("inner_steps", tc.inner_steps);
    t.get("lr", tc.lr);
    t.get("lr_min", tc.lr_min);
    t.get("mu0", tc.mu0);
    t.get("mu_growth", tc.mu_growth);
    t.get("violation_factor", tc.violation_factor);
    t.get("tol_c", tc.tol_c);
    t.get("mu_max", tc.mu_max);
    t.get("weight_decay", tc.weight_decay);
    t.get("seed", tc.seed);
    t.get("restarts", tc.restarts);
    t.check(tc.restarts >= 1, "restarts", "must be >= 1");
    t.check(tc.outer_iters >= 1, "outer_iters", "must be >= 1");
    t.check(tc.inner_steps >= 1, "inner_steps", "must be >= 1");
    t.check(tc.lr > 0.0, "lr", "must be > 0");
    t.check(tc.lr_min >= 0.0 && tc.lr_min <= tc.lr, "lr_min", "must lie in [0, lr]");
    t.check(tc.mu0 > 0.0, "mu0", "must be > 0");
    t.check(tc.mu_growth >= 1.0, "mu_growth", "must be >= 1");
    t.check(tc.violation_factor > 0.0 && tc.violation_factor <= 1.0, "violation_factor", "must lie in (0, 1]");
    t.check(tc.tol_c > 0.0, "tol_c", "must be > 0");
    t.check(tc.mu_max >= tc.mu0, "mu_max", "must be >= mu0");
    t.check(tc.weight_decay >= 0.0, "weight_decay", "must be >= 0");
    t.finish();
  }
  {
    Reader e = root.child("evaluation");
    e.get("pairs", c.evaluation.pairs);
    e.get("refine_steps", c.evaluation.refine_steps);
    e.get("seed", c.evaluation.seed);
    e.check(c.evaluation.pairs >= 1, "pairs", "must be >= 1");
    e.check(c.evaluation.refine_steps >= 0, "refine_steps", "must be >= 0");
    e.finish();
  }
  {
    Reader s = root.child("simulation");
    s.get("dt", c.simulation.dt);
    s.get("horizon", c.simulation.horizon);
    s.get("initial_conditions", c.simulation.initial_conditions);
    s.get("seed", c.simulation.seed);
    s.check(c.simulation.dt > 0.0, "dt", "must be > 0");
    s.check(c.simulation.horizon >= c.simulation.dt, "horizon", "must be >= dt");
    s.check(c.simulation.initial_conditions >= 1, "initial_conditions", "must be >= 1");
    s.finish();
  }
  std::string out = c.output.string();
  root.get("output", out);
  root.check(!out.empty(), "output", "must be a non-empty path");
  c.output = out;
  root.finish();
  return c;
}

}  // namespace

double FormulationSpec::resolve(double l_data) const {
  if (rho) return *rho;
  if (rho_factor) return *rho_factor * l_data;
  return 0.0;
}

ExperimentConfig ExperimentConfig::parse(const std::string& text, const std::string& source) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::Config, source + ": " + e.what());
  }
  try {
    ExperimentConfig c = read_config(j);
    c.validate();
    return c;
  } catch (const FieldError& e) {
    fail(ErrorKind::Config,
         source + ":" + std::to_string(line_of(text, e.pointer)) + ": " + e.pointer + ": " + e.message);
  }
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  try {
    ExperimentConfig c = read_config(j);
    c.validate();
    return c;
  } catch (const FieldError& e) {
    fail(ErrorKind::Config, "config: " + e.pointer + ": " + e.message);
  }
}

void ExperimentConfig::validate() const {
  require(dataset.grid_per_dim >= 2 || dataset.uniform >= 2 || (dataset.grid_per_dim == 0 && dataset.uniform >= 2),
          ErrorKind::Config, "config: dataset needs at least two training points");
  training.validate();
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json f = {{"kind", to_string(formulation.kind)}};
  if (formulation.rho) f["rho"] = *formulation.rho;
  if (formulation.rho_factor) f["rho_factor"] = *formulation.rho_factor;
  return {{"schema", kExperimentSchema},
          {"domain", {{"lower", domain.lower()}, {"upper", domain.upper()}}},
          {"dataset",
           {{"grid_per_dim", dataset.grid_per_dim},
            {"uniform", dataset.uniform},
            {"noise", dataset.noise},
            {"seed", dataset.seed},
            {"test", dataset.test},
            {"test_seed", dataset.test_seed},
            {"covering_resolution", dataset.covering_resolution}}},
          {"model",
           {{"type", model.type},
            {"width", model.arch.width},
            {"depth", model.arch.depth},
            {"activation", to_string(model.arch.activation)},
            {"layer", to_string(model.arch.layer)},
            {"seed", model.seed},
            {"psi_offset", model.psi_offset}}},
          {"formulation", f},
          {"training", training.to_json()},
          {"evaluation",
           {{"pairs", evaluation.pairs}, {"refine_steps", evaluation.refine_steps}, {"seed", evaluation.seed}}},
          {"simulation",
           {{"dt", simulation.dt},
            {"horizon", simulation.horizon},
            {"initial_conditions", simulation.initial_conditions},
            {"seed", simulation.seed}}},
          {"output", output.string()}};
}

// --- data -----------------------------------------------------------------------

BatchFn generator() { return benchmark_vector_field().rhs; }

nlohmann::json DataManifest::to_json() const {
  return {{"n_train", n_train},
          {"n_test", n_test},
          {"l_data", l_data},
          {"covering_radius",
           {{"radius", covering.radius},
            {"mode", to_string(covering.mode)},
            {"resolution", covering.resolution},
            {"probes", covering.probes},
            {"lower_bound", covering.lower_bound}}}};
}

namespace {

void write_json(const nlohmann::json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + path.string());
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, path.string() + ": " + e.what());
  }
}

void make_dirs(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  require(!ec, ErrorKind::Io, "cannot create directory " + p.string() + ": " + ec.message());
}

void require_generator_dim(const ExperimentConfig& cfg) {
  require(cfg.domain.dim() == 3, ErrorKind::Config, "config: the benchmark generator needs a 3-dimensional domain");
}

}  // namespace

DataManifest generate_data(const ExperimentConfig& cfg) {
  require_generator_dim(cfg);
  const DatasetSpec& d = cfg.dataset;
  Tensor pts(0, cfg.domain.dim());
  if (d.grid_per_dim >= 2) pts = sample_grid(cfg.domain, d.grid_per_dim);
  if (d.uniform > 0) {
    const Tensor u = sample_uniform(cfg.domain, d.uniform, d.seed);
    Tensor all(pts.rows() + u.rows(), pts.cols());
    all << pts, u;
    pts = std::move(all);
  }
  const LabeledDataset train = make_dataset(generator(), pts, d.noise, splitmix64(d.seed));
  const LabeledDataset test = make_dataset(generator(), sample_uniform(cfg.domain, d.test, d.test_seed), 0.0, 0);

  make_dirs(cfg.output);
  write_dataset_csv(train, cfg.output / "train.csv");
  write_dataset_csv(test, cfg.output / "test.csv");

  DataManifest m;
  m.n_train = train.size();
  m.n_test = test.size();
  m.l_data = empirical_lipschitz_lower(train);
  m.covering = covering_radius(train.inputs, cfg.domain, CoveringMode::ExactGrid, d.covering_resolution, 0);
  nlohmann::json j = m.to_json();
  j["noise_bound"] = d.noise;
  j["seeds"] = {{"train", d.seed}, {"test", d.test_seed}};
  j["domain"] = {{"lower", cfg.domain.lower()}, {"upper", cfg.domain.upper()}};
  j["files"] = {"train.csv", "test.csv"};
  write_json(j, cfg.output / "manifest.json");
  return m;
}

// --- training runs --------------------------------------------------------------

nlohmann::json RunResult::to_json() const {
  return {{"name", name}, {"training", training.to_json()}, {"metrics", metrics.to_json()}};
}

std::string default_run_name(const ExperimentConfig& cfg) {
  if (cfg.model.type == "mlp") return "mlp-wd" + format_double(cfg.training.weight_decay);
  std::string name = "lipnet-" + to_string(cfg.model.arch.layer) + "-" + to_string(cfg.formulation.kind);
  if (cfg.formulation.kind != Problem::P1) {
    if (cfg.formulation.rho_factor) {
      name += "-rf" + format_double(*cfg.formulation.rho_factor);
    } else {
      name += "-rho" + format_double(cfg.formulation.rho.value_or(0.0));
    }
  }
  return name;
}

RunResult train_run(const ExperimentConfig& cfg, const std::string& name) {
  const LabeledDataset train = read_dataset_csv(cfg.output / "train.csv");
  const LabeledDataset test = read_dataset_csv(cfg.output / "test.csv");
  require(train.input_dim() == cfg.domain.dim() && test.input_dim() == cfg.domain.dim(), ErrorKind::Config,
          "datasets do not match the configured domain");
  require(train.output_dim() == test.output_dim(), ErrorKind::Config, "train and test output widths differ");

  Architecture arch = cfg.model.arch;
  arch.input_dim = train.input_dim();
  arch.output_dim = train.output_dim();

  RunResult r;
  r.name = name.empty() ? default_run_name(cfg) : name;
  const fs::path dir = cfg.output / "runs" / r.name;
  make_dirs(dir);

  std::unique_ptr<Model> model;
  if (cfg.model.type == "mlp") {
    auto net = std::make_unique<MlpNet>(arch, cfg.model.seed);
    r.training = train_mlp_baseline(*net, train, cfg.training.weight_decay, cfg.training);
    model = std::move(net);
  } else {
    const double l_data = empirical_lipschitz_lower(train);
    const Formulation form{cfg.formulation.kind, cfg.formulation.resolve(l_data)};
    const double eta0 = l_data * std::exp(cfg.model.psi_offset);
    MultistartResult best = train_multistart(arch, eta0, cfg.model.seed, train, form, cfg.training);
    r.training = std::move(best.report);
    model = std::make_unique<LipNet>(best.net);
  }
  r.metrics = evaluate_metrics(*model, train, test, cfg.domain,
                               {cfg.evaluation.pairs, cfg.evaluation.refine_steps, cfg.evaluation.seed});

  save_checkpoint(*model, dir / "checkpoint.json");
  nlohmann::json j = r.to_json();
  j["model"] = model->describe();
  j["config"] = cfg.to_json();
  write_json(j, dir / "report.json");
  return r;
}

// --- simulation -----------------------------------------------------------------

namespace {

std::string safe_label(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
  return out;
}

}  // namespace

nlohmann::json simulate_models(const ExperimentConfig& cfg, const std::vector<fs::path>& checkpoints,
                               const std::vector<std::string>& labels, const fs::path& out_dir) {
  require_generator_dim(cfg);
  require(labels.size() == checkpoints.size(), ErrorKind::Argument, "simulate: one label per checkpoint");
  make_dirs(out_dir);
  const SimulationSpec& s = cfg.simulation;
  const Tensor x0 = sample_uniform(cfg.domain, s.initial_conditions, s.seed);
  const VectorField truth = benchmark_vector_field();

  write_trajectory_csv(integrate(truth, x0, s.dt, s.horizon), 0, out_dir / "trajectory_true.csv");

  nlohmann::json models = nlohmann::json::array();
  std::vector<Curve> curves;
  for (std::size_t k = 0; k < checkpoints.size(); ++k) {
    const std::unique_ptr<Model> model = load_checkpoint(checkpoints[k]);
    require(model->input_dim() == 3 && model->output_dim() == 3, ErrorKind::Config,
            checkpoints[k].string() + ": model is not a 3-dimensional vector field");
    const VectorField field = make_field(3, model->as_batch_fn(), labels[k]);
    const std::string tag = safe_label(labels[k]);
    nlohmann::json entry = {{"label", labels[k]}, {"checkpoint", checkpoints[k].string()}};
    TrajectoryError err;
    try {
      err = trajectory_error(field, truth, x0, s.dt, s.horizon, &cfg.domain);
      write_trajectory_csv(integrate(field, x0, s.dt, s.horizon), 0, out_dir / ("trajectory_" + tag + ".csv"));
      entry["blow_up"] = false;
    } catch (const BlowUpError& e) {
      // Keep the finite prefix; the rest of the curve is reported as infinite.
      const Trajectory& part = e.partial();
      const Trajectory ref = integrate(truth, x0, s.dt, s.horizon);
      err.times = ref.times;
      err.learned_exited = true;
      for (std::size_t t = 0; t < ref.times.size(); ++t) {
        if (t < part.states.size()) {
          const double m = (part.states[t] - ref.states[t]).rowwise().squaredNorm().mean();
          err.mse.push_back(m);
          err.sup_error = std::max(err.sup_error, std::sqrt((part.states[t] - ref.states[t]).rowwise().squaredNorm().maxCoeff()));
        } else {
          err.mse.push_back(std::numeric_limits<double>::infinity());
        }
      }
      err.sup_error = std::numeric_limits<double>::infinity();
      entry["blow_up"] = true;
      entry["blow_up_message"] = e.what();
    }
    write_error_curve_csv(err, out_dir / ("errors_" + tag + ".csv"));
    curves.push_back({labels[k], err.times, err.mse});
    double max_mse = 0.0;
    for (double v : err.mse) max_mse = std::max(max_mse, v);
    entry["errors_csv"] = "errors_" + tag + ".csv";
    entry["sup_error"] = std::isfinite(err.sup_error) ? nlohmann::json(err.sup_error) : nlohmann::json("inf");
    entry["max_mse"] = std::isfinite(max_mse) ? nlohmann::json(max_mse) : nlohmann::json("inf");
    entry["final_mse"] = std::isfinite(err.mse.back()) ? nlohmann::json(err.mse.back()) : nlohmann::json("inf");
    entry["exited_domain"] = err.learned_exited;
    // The simulation-error certificate assumes trajectories stay in the domain.
    entry["certificate_applicable"] = !err.learned_exited;
    models.push_back(entry);
  }
  write_curves_svg(curves, "Trajectory MSE over " + std::to_string(s.initial_conditions) + " initial conditions",
                   "mean squared state error", out_dir / "fig2.svg");
  nlohmann::json j = {{"dt", s.dt},
                      {"horizon", s.horizon},
                      {"initial_conditions", s.initial_conditions},
                      {"seed", s.seed},
                      {"models", models},
                      {"note", "no gain function is known for the benchmark system; raw trajectory errors are reported"}};
  write_json(j, out_dir / "simulation.json");
  return j;
}

// --- report tables --------------------------------------------------------------

nlohmann::json ReportSummary::to_json() const {
  std::vector<std::string> f;
  for (const auto& p : files) f.push_back(p.string());
  return {{"runs", runs}, {"missing", missing}, {"files", f}};
}

namespace {

std::string num(const nlohmann::json& v) {
  if (v.is_number()) return format_double(v.get<double>());
  return "--";
}

int layer_rank(const std::string& layer) {
  if (layer == "sandwich") return 0;
  if (layer == "orthogonal") return 1;
  return 2;
}

void write_lines(const fs::path& path, const std::string& header, const std::vector<std::string>& rows) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << header << '\n';
  for (const auto& r : rows) out << r << '\n';
  require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + path.string());
}

std::vector<double> read_column_csv(const fs::path& path, std::vector<double>& times) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<double> ys;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    times.push_back(std::stod(line.substr(0, comma)));
    ys.push_back(std::stod(line.substr(comma + 1)));
  }
  return ys;
}

}  // namespace

ReportSummary build_report(const fs::path& run_dir) {
  require(fs::is_directory(run_dir), ErrorKind::Io, "run directory not found: " + run_dir.string());
  ReportSummary summary;

  struct Row {
    std::string name;
    nlohmann::json report;
  };
  std::vector<Row> rows;
  const fs::path runs = run_dir / "runs";
  if (fs::is_directory(runs)) {
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(runs)) {
      if (e.is_directory()) dirs.push_back(e.path());
    }
    std::sort(dirs.begin(), dirs.end());
    for (const auto& d : dirs) {
      const fs::path rp = d / "report.json";
      try {
        rows.push_back({d.filename().string(), read_json(rp)});
      } catch (const Error&) {
        summary.missing.push_back(d.filename().string());
      }
    }
  }
  summary.runs = static_cast<Index>(rows.size());

  std::vector<std::pair<std::string, std::string>> t1;  // sort key, line
  std::vector<std::pair<double, std::string>> t2;
  std::vector<std::pair<std::string, std::string>> t3;
  for (const Row& row : rows) {
    try {
      const auto& tr = row.report.at("training");
      const auto& m = row.report.at("metrics");
      const std::string metrics = num(m.at("train_mse")) + "," + num(m.at("train_max")) + "," + num(m.at("test_mse")) +
                                  "," + num(m.at("test_max")) + "," + num(m.at("empirical_lipschitz"));
      if (tr.at("model") == "mlp") {
        const double wd = tr.at("weight_decay").get<double>();
        t2.emplace_back(wd, format_double(wd) + "," + metrics);
        if (wd == 0.0) t1.emplace_back("0", "MLP,--," + metrics + ",--");
        continue;
      }
      const std::string form = tr.at("formulation").get<std::string>();
      const std::string layer = row.report.at("model").at("layer").get<std::string>();
      const std::string rho = form == "P1" ? "--" : num(tr.at("rho"));
      const std::string cert = num(m.at("certified_lipschitz"));
      if (layer == "sandwich") {
        const double r = tr.value("rho", 0.0);
        std::ostringstream key;
        key << form << '/' << std::to_string(1e6 - r);
        t1.emplace_back("1" + key.str(), "LipNet-" + form + "," + rho + "," + metrics + "," + cert);
      }
      t3.emplace_back(form + std::to_string(layer_rank(layer)) + row.name, form + "," + layer + "," + metrics + "," + cert);
    } catch (const nlohmann::json::exception&) {
      summary.missing.push_back(row.name);
    }
  }
  std::sort(t1.begin(), t1.end());
  std::sort(t2.begin(), t2.end());
  std::sort(t3.begin(), t3.end());
  auto lines = [](const auto& v) {
    std::vector<std::string> out;
    for (const auto& p : v) out.push_back(p.second);
    return out;
  };
  write_lines(run_dir / "table1.csv", kTable1Header, lines(t1));
  write_lines(run_dir / "table2.csv", kTable2Header, lines(t2));
  write_lines(run_dir / "table3.csv", kTable3Header, lines(t3));
  summary.files = {run_dir / "table1.csv", run_dir / "table2.csv", run_dir / "table3.csv"};

  const fs::path sim = run_dir / "simulation" / "simulation.json";
  if (fs::exists(sim)) {
    const nlohmann::json j = read_json(sim);
    std::vector<Curve> curves;
    for (const auto& m : j.at("models")) {
      Curve c;
      c.label = m.at("label").get<std::string>();
      c.y = read_column_csv(sim.parent_path() / m.at("errors_csv").get<std::string>(), c.x);
      curves.push_back(std::move(c));
    }
    write_curves_svg(curves, "Trajectory errors of the learned models", "mean squared state error",
                     run_dir / "fig2.svg");
    summary.files.push_back(run_dir / "fig2.svg");
  }
  return summary;
}

}  // namespace lipfit
