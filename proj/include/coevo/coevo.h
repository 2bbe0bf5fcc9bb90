#ifndef COEVO_COEVO_H
#define COEVO_COEVO_H

/* C interface of the coevo library. All functions are thread-safe except
 * that one experiment handle must not be run from two threads at once.
 * Strings returned through char** are owned by the caller and released with
 * coevo_string_free. */

#include <stddef.h>

#if defined(_WIN32)
#define COEVO_API __declspec(dllexport)
#else
#define COEVO_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum coevo_status {
  COEVO_OK = 0,
  COEVO_ERR_INVALID_ARGUMENT = 1,
  COEVO_ERR_CONFIG = 2,
  COEVO_ERR_MODEL = 3,
  COEVO_ERR_INVARIANT = 4,
  COEVO_ERR_NULLCLINE_NOT_FOUND = 5,
  COEVO_ERR_CONSENSUS_BOUNDARY = 6,
  COEVO_ERR_CLOSURE_SINGULAR = 7,
  COEVO_ERR_CONTINUATION_FAILED = 8,
  COEVO_ERR_INTEGRATION = 9,
  COEVO_ERR_INTERNAL = 10
} coevo_status;

typedef enum coevo_closure { COEVO_CLOSURE_CONDITIONAL = 0, COEVO_CLOSURE_KIRKWOOD = 1 } coevo_closure;

typedef struct coevo_experiment coevo_experiment;

/* Rates of the binary minimal model. */
typedef struct coevo_minimal_params {
  double alpha_pm, alpha_mp;
  double beta_pp, beta_mm, beta_pm;
  double gamma_pp, gamma_mm, gamma_pm;
} coevo_minimal_params;

COEVO_API const char* coevo_version(void);

/* Process exit status for a status code: 0, 2 (config/argument), 3 (model or
 * runtime), 4 (invariant violation). */
COEVO_API int coevo_exit_code(coevo_status status);

/* {"error": {"code", "message", "field", "exit_code"}} for the last failure on
 * the calling thread, or NULL. Valid until the next call on this thread. */
COEVO_API const char* coevo_last_error_json(void);

COEVO_API void coevo_string_free(char* s);

/* Parses and fully validates a config (or a manifest written by a run). */
COEVO_API coevo_status coevo_experiment_from_json(const char* json, coevo_experiment** out);
COEVO_API coevo_status coevo_experiment_load(const char* path, coevo_experiment** out);
COEVO_API void coevo_experiment_free(coevo_experiment* exp);

/* Plan JSON: {"kind", "config_hash", "runs", "summary": [...], "warnings": [...]}. */
COEVO_API coevo_status coevo_experiment_plan(const coevo_experiment* exp, char** plan_json);
/* Resolved config with defaults filled in. */
COEVO_API coevo_status coevo_experiment_config(const coevo_experiment* exp, char** config_json);

/* out_dir may be NULL (config "output", then $COEVO_OUT_DIR, then
 * ./coevo-out); workers <= 0 keeps the config value. manifest_json may be
 * NULL. */
COEVO_API coevo_status coevo_experiment_run(const coevo_experiment* exp, const char* out_dir, int workers,
                                            char** manifest_json);

/* Six moments ordered (f_pp, g_pp, f_mm, g_mm, f_pm, g_pm). */
COEVO_API coevo_status coevo_closure_rhs(const coevo_minimal_params* p, coevo_closure kind, const double moments[6],
                                         double out[6]);
COEVO_API coevo_status coevo_polarization_stable(const coevo_minimal_params* p, double rho_p, int* stable,
                                                 double* margin);
/* Stationary branch at beta_pm = p->beta_pm from the polarized family. */
COEVO_API coevo_status coevo_continue_small_epsilon(const coevo_minimal_params* p, double rho_p, coevo_closure kind,
                                                    double moments[6], double* dfdeps, double* residual);

#ifdef __cplusplus
}
#endif

#endif
