#include "lipfit/lipfit.h"

#include "lipfit/bounds.hpp"
#include "lipfit/error.hpp"
#include "lipfit/experiment.hpp"
#include "lipfit/extension.hpp"

#include <cstring>
#include <memory>
#include <optional>
#include <string>

using namespace lipfit;

struct lf_dataset {
  LabeledDataset ds;
};

struct lf_model {
  std::unique_ptr<Model> net;
  std::optional<LipschitzExtension> ext;

  Index input_dim() const { return net ? net->input_dim() : ext->dataset().input_dim(); }
  Index output_dim() const { return net ? net->output_dim() : ext->dataset().output_dim(); }
  Tensor eval(const Tensor& x) const { return net ? net->evaluate(x) : ext->evaluate_batch(x); }
};

namespace {

thread_local std::string g_error;

lf_status status_of(ErrorKind k) {
  switch (k) {
    case ErrorKind::Dimension: return LF_ERR_DIMENSION;
    case ErrorKind::Convergence: return LF_ERR_CONVERGENCE;
    case ErrorKind::Numeric: return LF_ERR_NUMERIC;
    case ErrorKind::Domain: return LF_ERR_DOMAIN;
    case ErrorKind::InfeasibleData: return LF_ERR_INFEASIBLE;
    case ErrorKind::Argument: return LF_ERR_ARGUMENT;
    case ErrorKind::Contract: return LF_ERR_CONTRACT;
    case ErrorKind::Divergence: return LF_ERR_DIVERGENCE;
    case ErrorKind::Calibration: return LF_ERR_CALIBRATION;
    case ErrorKind::Config: return LF_ERR_CONFIG;
    case ErrorKind::Io: return LF_ERR_IO;
  }
  return LF_ERR_INTERNAL;
}

template <class F>
lf_status guarded(F&& f) {
  try {
    g_error.clear();
    f();
    return LF_OK;
  } catch (const Error& e) {
    g_error = e.what();
    return status_of(e.kind());
  } catch (const nlohmann::json::exception& e) {
    g_error = e.what();
    return LF_ERR_CONFIG;
  } catch (const std::bad_alloc&) {
    g_error = "out of memory";
    return LF_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_error = e.what();
    return LF_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (p == nullptr) fail(ErrorKind::Argument, std::string(what) + " is null");
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void emit(char** out, const nlohmann::json& j) {
  if (out != nullptr) *out = dup(j.dump(2));
}

}  // namespace

extern "C" {

const char* lf_version(void) { return "0.3.0"; }

const char* lf_last_error(void) { return g_error.c_str(); }

const char* lf_status_name(lf_status s) {
  switch (s) {
    case LF_OK: return "ok";
    case LF_ERR_ARGUMENT: return "argument";
    case LF_ERR_CONFIG: return "config";
    case LF_ERR_DIVERGENCE: return "divergence";
    case LF_ERR_IO: return "io";
    case LF_ERR_DIMENSION: return "dimension";
    case LF_ERR_NUMERIC: return "numeric";
    case LF_ERR_CONVERGENCE: return "convergence";
    case LF_ERR_INFEASIBLE: return "infeasible-data";
    case LF_ERR_CONTRACT: return "contract";
    case LF_ERR_DOMAIN: return "domain";
    case LF_ERR_CALIBRATION: return "calibration";
    case LF_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

void lf_free_string(char* s) { std::free(s); }

lf_status lf_dataset_load(const char* path, lf_dataset** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new lf_dataset{read_dataset_csv(path)};
  });
}

lf_status lf_dataset_save(const lf_dataset* ds, const char* path) {
  return guarded([&] {
    need(ds, "dataset");
    need(path, "path");
    write_dataset_csv(ds->ds, path);
  });
}

void lf_dataset_free(lf_dataset* ds) { delete ds; }

lf_status lf_dataset_shape(const lf_dataset* ds, int64_t* samples, int64_t* input_dim, int64_t* output_dim,
                           double* noise_bound) {
  return guarded([&] {
    need(ds, "dataset");
    if (samples) *samples = ds->ds.size();
    if (input_dim) *input_dim = ds->ds.input_dim();
    if (output_dim) *output_dim = ds->ds.output_dim();
    if (noise_bound) *noise_bound = ds->ds.noise_bound;
  });
}

lf_status lf_dataset_lipschitz(const lf_dataset* ds, double* l_data) {
  return guarded([&] {
    need(ds, "dataset");
    need(l_data, "l_data");
    *l_data = empirical_lipschitz_lower(ds->ds);
  });
}

lf_status lf_dataset_covering_radius(const lf_dataset* ds, const double* lower, const double* upper, int mode,
                                     int64_t resolution, uint64_t seed, double* radius) {
  return guarded([&] {
    need(ds, "dataset");
    need(lower, "lower");
    need(upper, "upper");
    need(radius, "radius");
    require(mode == 0 || mode == 1, ErrorKind::Argument, "mode must be 0 (grid) or 1 (monte-carlo)");
    const auto n = static_cast<std::size_t>(ds->ds.input_dim());
    const Domain dom(std::vector<double>(lower, lower + n), std::vector<double>(upper, upper + n));
    *radius = covering_radius(ds->ds.inputs, dom, mode == 0 ? CoveringMode::ExactGrid : CoveringMode::MonteCarlo,
                              resolution, seed)
                  .radius;
  });
}

lf_status lf_model_load(const char* path, lf_model** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    auto m = std::make_unique<lf_model>();
    m->net = load_checkpoint(path);
    *out = m.release();
  });
}

lf_status lf_model_mcshane(const lf_dataset* ds, lf_model** out) {
  return guarded([&] {
    need(ds, "dataset");
    need(out, "out");
    auto m = std::make_unique<lf_model>();
    m->ext.emplace(ds->ds);
    *out = m.release();
  });
}

lf_status lf_model_save(const lf_model* model, const char* path) {
  return guarded([&] {
    need(model, "model");
    need(path, "path");
    require(model->net != nullptr, ErrorKind::Argument, "the data extension has no checkpoint form");
    save_checkpoint(*model->net, path);
  });
}

void lf_model_free(lf_model* model) { delete model; }

lf_status lf_model_dims(const lf_model* model, int64_t* input_dim, int64_t* output_dim) {
  return guarded([&] {
    need(model, "model");
    if (input_dim) *input_dim = model->input_dim();
    if (output_dim) *output_dim = model->output_dim();
  });
}

lf_status lf_model_info(const lf_model* model, char** json) {
  return guarded([&] {
    need(model, "model");
    need(json, "json");
    if (model->net) {
      emit(json, model->net->describe());
      return;
    }
    const auto& ext = *model->ext;
    emit(json, {{"model", "mcshane"},
                {"samples", ext.dataset().size()},
                {"input_dim", ext.dataset().input_dim()},
                {"output_dim", ext.dataset().output_dim()},
                {"lipschitz_per_output", ext.lip()},
                {"certified_lipschitz", ext.vector_lipschitz()}});
  });
}

lf_status lf_model_certificate(const lf_model* model, double* bound, int* has_certificate) {
  return guarded([&] {
    need(model, "model");
    need(bound, "bound");
    need(has_certificate, "has_certificate");
    const std::optional<double> c = model->net ? model->net->certified_lipschitz()
                                               : std::optional<double>(model->ext->vector_lipschitz());
    *has_certificate = c.has_value() ? 1 : 0;
    *bound = c.value_or(0.0);
  });
}

lf_status lf_model_eval(const lf_model* model, const double* x, int64_t rows, double* y) {
  return guarded([&] {
    need(model, "model");
    need(x, "x");
    need(y, "y");
    require(rows >= 1, ErrorKind::Argument, "rows must be >= 1");
    const Index n = model->input_dim();
    const Tensor in = Eigen::Map<const Tensor>(x, rows, n);
    const Tensor out = model->eval(in);
    std::memcpy(y, out.data(), sizeof(double) * static_cast<std::size_t>(out.size()));
  });
}

lf_status lf_model_score(const lf_model* model, const lf_dataset* ds, char** json) {
  return guarded([&] {
    need(model, "model");
    need(ds, "dataset");
    need(json, "json");
    require(ds->ds.input_dim() == model->input_dim() && ds->ds.output_dim() == model->output_dim(),
            ErrorKind::Dimension, "model and dataset dimensions differ");
    const Tensor& targets = ds->ds.outputs;
    const SupLossEstimate s = loss_on_points([&](const Tensor& x) { return model->eval(x); },
                                             [&](const Tensor&) { return targets; }, ds->ds.inputs);
    emit(json, {{"samples", s.probes}, {"mse", s.mse}, {"max", s.sup}});
  });
}

lf_status lf_config_check(const char* config_text, const char* source, char** normalized_json) {
  return guarded([&] {
    need(config_text, "config_text");
    const ExperimentConfig cfg = ExperimentConfig::parse(config_text, source ? source : "config");
    emit(normalized_json, cfg.to_json());
  });
}

lf_status lf_gen_data(const char* config_text, const char* source, char** manifest_json) {
  return guarded([&] {
    need(config_text, "config_text");
    const ExperimentConfig cfg = ExperimentConfig::parse(config_text, source ? source : "config");
    emit(manifest_json, generate_data(cfg).to_json());
  });
}

lf_status lf_train(const char* config_text, const char* source, const char* run_name, char** report_json) {
  return guarded([&] {
    need(config_text, "config_text");
    const ExperimentConfig cfg = ExperimentConfig::parse(config_text, source ? source : "config");
    emit(report_json, train_run(cfg, run_name ? run_name : "").to_json());
  });
}

lf_status lf_simulate(const char* config_text, const char* source, const char* const* checkpoints,
                      const char* const* labels, int64_t count, const char* out_dir, char** json) {
  return guarded([&] {
    need(config_text, "config_text");
    need(out_dir, "out_dir");
    require(count >= 1, ErrorKind::Argument, "need at least one checkpoint");
    need(checkpoints, "checkpoints");
    const ExperimentConfig cfg = ExperimentConfig::parse(config_text, source ? source : "config");
    std::vector<std::filesystem::path> paths;
    std::vector<std::string> names;
    for (int64_t i = 0; i < count; ++i) {
      need(checkpoints[i], "checkpoint path");
      paths.emplace_back(checkpoints[i]);
      names.emplace_back(labels && labels[i] ? labels[i] : std::filesystem::path(checkpoints[i]).parent_path().filename().string());
    }
    emit(json, simulate_models(cfg, paths, names, out_dir));
  });
}

lf_status lf_report(const char* run_dir, char** summary_json) {
  return guarded([&] {
    need(run_dir, "run_dir");
    emit(summary_json, build_report(run_dir).to_json());
  });
}

lf_status lf_bounds(const char* inputs_json, char** report_json) {
  return guarded([&] {
    need(inputs_json, "inputs_json");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(inputs_json);
    } catch (const nlohmann::json::parse_error& e) {
      fail(ErrorKind::Config, std::string("bound inputs: ") + e.what());
    }
    BoundInputs in;
    if (j.contains("l_g") && !j.at("l_g").is_null()) in.l_g = j.at("l_g").get<double>();
    in.l_data = j.value("l_data", in.l_data);
    in.l_f = j.value("l_f", in.l_f);
    in.h = j.value("h", in.h);
    in.eps_bar = j.value("eps_bar", in.eps_bar);
    in.eps = j.value("eps", in.eps);
    in.rho = j.value("rho", in.rho);
    in.n = j.value("n", in.n);
    in.N = j.value("N", in.N);
    in.delta = j.value("delta", in.delta);
    in.k1 = j.value("k1", in.k1);
    in.k2 = j.value("k2", in.k2);
    emit(report_json, bound_report(in).to_json());
  });
}

lf_status lf_calibrate(int n, const int64_t* sizes, int64_t count, int trials, double delta, uint64_t seed,
                       char** json) {
  return guarded([&] {
    need(sizes, "sizes");
    std::vector<Index> ns(sizes, sizes + count);
    emit(json, calibrate_thm4_constants(n, ns, trials, delta, seed).to_json());
  });
}

}  // extern "C"
