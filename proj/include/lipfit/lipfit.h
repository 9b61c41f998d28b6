/* lipfit C interface.
 *
 * Objects are opaque handles created by *_load / *_create functions and
 * released with the matching *_free. Every function returns an lf_status;
 * on failure lf_last_error() describes the problem (per thread, valid until
 * the next call on that thread). Strings returned through char** are
 * heap-allocated JSON or text and must be released with lf_free_string.
 * Matrices are passed row-major, one sample per row.
 */
#ifndef LIPFIT_H
#define LIPFIT_H

#include <stdint.h>

#if defined(_WIN32)
#define LF_API __declspec(dllexport)
#else
#define LF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  LF_OK = 0,
  LF_ERR_ARGUMENT = 1,
  LF_ERR_CONFIG = 2,
  LF_ERR_DIVERGENCE = 3,
  LF_ERR_IO = 4,
  LF_ERR_DIMENSION = 5,
  LF_ERR_NUMERIC = 6,
  LF_ERR_CONVERGENCE = 7,
  LF_ERR_INFEASIBLE = 8,
  LF_ERR_CONTRACT = 9,
  LF_ERR_DOMAIN = 10,
  LF_ERR_CALIBRATION = 11,
  LF_ERR_INTERNAL = 99
} lf_status;

typedef struct lf_dataset lf_dataset;
typedef struct lf_model lf_model;

LF_API const char* lf_version(void);
LF_API const char* lf_last_error(void);
LF_API const char* lf_status_name(lf_status status);
LF_API void lf_free_string(char* s);

/* Datasets (CSV: header "n,m,noise_bound", then rows x_1..x_n,y_1..y_m). */
LF_API lf_status lf_dataset_load(const char* path, lf_dataset** out);
LF_API lf_status lf_dataset_save(const lf_dataset* ds, const char* path);
LF_API void lf_dataset_free(lf_dataset* ds);
LF_API lf_status lf_dataset_shape(const lf_dataset* ds, int64_t* samples, int64_t* input_dim, int64_t* output_dim,
                                  double* noise_bound);
/* Largest pairwise difference quotient of the data. */
LF_API lf_status lf_dataset_lipschitz(const lf_dataset* ds, double* l_data);
/* Covering radius of the inputs over the box [lower, upper]; mode 0 = grid
 * (resolution per axis), 1 = Monte Carlo (resolution = probe count). The
 * value is an estimate from below. */
LF_API lf_status lf_dataset_covering_radius(const lf_dataset* ds, const double* lower, const double* upper, int mode,
                                            int64_t resolution, uint64_t seed, double* radius);

/* Models: trained checkpoints or the minimal-Lipschitz data extension. */
LF_API lf_status lf_model_load(const char* checkpoint_path, lf_model** out);
LF_API lf_status lf_model_mcshane(const lf_dataset* ds, lf_model** out);
LF_API lf_status lf_model_save(const lf_model* model, const char* path);
LF_API void lf_model_free(lf_model* model);
LF_API lf_status lf_model_dims(const lf_model* model, int64_t* input_dim, int64_t* output_dim);
LF_API lf_status lf_model_info(const lf_model* model, char** json);
/* has_certificate is set to 0 when the model carries no certified bound. */
LF_API lf_status lf_model_certificate(const lf_model* model, double* bound, int* has_certificate);
/* y must hold rows * output_dim values. */
LF_API lf_status lf_model_eval(const lf_model* model, const double* x, int64_t rows, double* y);
/* MSE and Max of the model against the dataset outputs. */
LF_API lf_status lf_model_score(const lf_model* model, const lf_dataset* ds, char** json);

/* Experiment steps. config_text is a "lipfit.experiment/1" JSON document;
 * source names it in error messages. */
LF_API lf_status lf_config_check(const char* config_text, const char* source, char** normalized_json);
LF_API lf_status lf_gen_data(const char* config_text, const char* source, char** manifest_json);
LF_API lf_status lf_train(const char* config_text, const char* source, const char* run_name, char** report_json);
LF_API lf_status lf_simulate(const char* config_text, const char* source, const char* const* checkpoints,
                             const char* const* labels, int64_t count, const char* out_dir, char** json);
LF_API lf_status lf_report(const char* run_dir, char** summary_json);

/* Bound calculators. inputs_json keys: l_g (optional), l_data, l_f, h,
 * eps_bar, eps, rho, n, N, delta, k1, k2. */
LF_API lf_status lf_bounds(const char* inputs_json, char** report_json);
LF_API lf_status lf_calibrate(int n, const int64_t* sizes, int64_t count, int trials, double delta, uint64_t seed,
                              char** json);

#ifdef __cplusplus
}
#endif

#endif /* LIPFIT_H */
