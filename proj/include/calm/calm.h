/* C interface to the calm library: remote state estimation with a learned
 * transmission scheduler and a learned receiver.
 *
 * Every function returns a calm_status. On failure the message is available
 * from calm_last_error() until the next call on the same thread. Handles are
 * opaque; release them with the matching *_free function (NULL is accepted).
 */
#ifndef CALM_CALM_H_
#define CALM_CALM_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CALM_API __declspec(dllexport)
#else
#define CALM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum calm_status {
  CALM_OK = 0,
  CALM_ERR_INTERNAL = 1,
  CALM_ERR_INVALID = 2, /* bad argument, schema violation, shape mismatch */
  CALM_ERR_NUMERIC = 3  /* non-finite state, loss or gradient */
} calm_status;

CALM_API const char* calm_last_error(void);
CALM_API const char* calm_version(void);

/* ---- Run configuration (JSON) ---- */

typedef struct calm_config calm_config;

CALM_API calm_status calm_config_load(const char* path, calm_config** out);
CALM_API calm_status calm_config_parse(const char* json_text, calm_config** out);
/* Applies CALM_OUTPUT_DIR and CALM_THREADS if set. */
CALM_API calm_status calm_config_apply_environment(calm_config* config);
CALM_API calm_status calm_config_set_output_dir(calm_config* config, const char* dir);
CALM_API calm_status calm_config_set_seed(calm_config* config, uint64_t seed);
CALM_API calm_status calm_config_set_threads(calm_config* config, int threads);
/* Resolved JSON. The string is owned by the handle and valid until the next
 * call on it. */
CALM_API calm_status calm_config_to_json(calm_config* config, const char** json_text);
CALM_API void calm_config_free(calm_config* config);

/* ---- Run directories ---- */

typedef struct calm_run calm_run;

/* Alternating training; writes checkpoints and logs into a new directory. */
CALM_API calm_status calm_train(const calm_config* config, calm_run** out);
/* New run directory holding only the resolved config and initial networks. */
CALM_API calm_status calm_run_create(const calm_config* config, calm_run** out);
/* Existing run directory; loads the newest checkpoints. */
CALM_API calm_status calm_run_open(const char* dir, calm_run** out);
CALM_API const char* calm_run_path(const calm_run* run);
CALM_API calm_status calm_run_set_threads(calm_run* run, int threads);
CALM_API void calm_run_free(calm_run* run);

typedef enum calm_policy_kind {
  CALM_POLICY_LEARNED = 0,
  CALM_POLICY_LINEAR = 1, /* scheduler trained against the linear receiver */
  CALM_POLICY_ALWAYS = 2,
  CALM_POLICY_NEVER = 3,
  CALM_POLICY_PERIODIC = 4, /* param = period */
  CALM_POLICY_EVENT = 5     /* param = threshold on ||e||^2 */
} calm_policy_kind;

typedef enum calm_estimator_kind {
  CALM_ESTIMATOR_DEFAULT = 0,
  CALM_ESTIMATOR_CALM = 1,
  CALM_ESTIMATOR_LINEAR = 2
} calm_estimator_kind;

typedef struct calm_policy {
  calm_policy_kind kind;
  double param;
} calm_policy;

/* Parses learned | linear | always | never | periodic:<p> | event:<tau>. */
CALM_API calm_status calm_policy_parse(const char* text, calm_policy* out);

typedef struct calm_eval_summary {
  int seeds;
  int horizon;
  double mean_cost, std_cost;
  double mean_estimation_cost, std_estimation_cost;
  double mean_transmissions, std_transmissions;
} calm_eval_summary;

typedef struct calm_landscape_summary {
  int points;
  double accuracy;
  int silent_component;
} calm_landscape_summary;

/* The command functions write their CSV artifacts into the run directory
 * and, when `log` is non-NULL, the printed summary to that stream
 * (a FILE*). */
CALM_API calm_status calm_evaluate(const calm_run* run, calm_policy policy,
                                   calm_estimator_kind estimator, void* log,
                                   calm_eval_summary* out);
CALM_API calm_status calm_landscape(const calm_run* run, calm_policy policy,
                                    calm_estimator_kind estimator, void* log,
                                    calm_landscape_summary* out);
/* Number of rows written to pareto.csv in *rows. */
CALM_API calm_status calm_pareto(const calm_run* run, void* log, int* rows);
CALM_API calm_status calm_baseline(calm_run* run, void* log, calm_eval_summary* out);

/* ---- Low-level building blocks ---- */

typedef struct calm_mlp calm_mlp;

/* ReLU hidden layers, linear output; sizes = {in, hidden..., out}. */
CALM_API calm_status calm_mlp_create(const int* sizes, size_t count, uint64_t seed,
                                     calm_mlp** out);
CALM_API calm_status calm_mlp_load(const char* path, calm_mlp** out);
CALM_API calm_status calm_mlp_save(const calm_mlp* net, const char* path);
CALM_API int calm_mlp_input_dim(const calm_mlp* net);
CALM_API int calm_mlp_output_dim(const calm_mlp* net);
CALM_API calm_status calm_mlp_forward(const calm_mlp* net, const double* input,
                                      double* output);
CALM_API void calm_mlp_free(calm_mlp* net);

/* Discounted DARE with column-major n*n A, n*m B, n*n Q, m*m R. Writes P
 * (n*n) and K (m*n, u = K x) and, optionally, the residual norm. */
CALM_API calm_status calm_solve_dare(int n, int m, const double* A, const double* B,
                                     const double* Q, const double* R, double gamma,
                                     double* P, double* K, double* residual);

typedef struct calm_system calm_system;

/* Benchmark plant (pendulum, vdp, tracking, boeing747) with its default
 * noise mixture, or the named preset when gmm_preset is non-NULL. */
CALM_API calm_status calm_system_create(const char* name, const char* gmm_preset,
                                        calm_system** out);
CALM_API int calm_system_state_dim(const calm_system* sys);
/* x_next = f(x, w) for an explicit noise vector w. */
CALM_API calm_status calm_system_step(const calm_system* sys, const double* x,
                                      const double* w, double* x_next);
CALM_API void calm_system_free(calm_system* sys);

#ifdef __cplusplus
}
#endif

#endif /* CALM_CALM_H_ */
