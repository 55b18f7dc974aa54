/* Public C interface to the distribution-conditioned RL library.
 *
 * All functions return a disco_status; on failure a thread-local message is
 * available through disco_last_error(). Objects returned through out-pointers
 * are owned by the caller and released with the matching _free function.
 *
 * Status codes mirror the CLI exit contract: 0 success, 1 usage error
 * (invalid arguments, malformed configs, precondition violations), 2 runtime
 * failure (I/O, numerical breakdown).
 */
#ifndef DISCO_DISCO_H_
#define DISCO_DISCO_H_

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum disco_status {
  DISCO_OK = 0,
  DISCO_USAGE_ERROR = 1,
  DISCO_RUNTIME_ERROR = 2
} disco_status;

/* Message describing the most recent failure on this thread. */
const char* disco_last_error(void);

const char* disco_version(void);

/* --- Flat World environment ------------------------------------------- */

typedef struct disco_env disco_env;

disco_status disco_env_new(int m_objects, uint64_t seed, disco_env** out);
void disco_env_free(disco_env* env);
disco_status disco_env_reset(disco_env* env, uint64_t seed);
disco_status disco_env_step(disco_env* env, double dx, double dy, double grab);
int disco_env_observation_dim(const disco_env* env);
/* Writes the observation into out[0..dim); fails if capacity is too small. */
disco_status disco_env_observe(const disco_env* env, double* out, int capacity);
/* Number of objects strictly within `radius` of their positions in the goal
 * observation `final_state` (length = observation dim). */
disco_status disco_env_tasks_solved(const disco_env* env, const double* final_state,
                                    int length, double radius, int* out);

/* --- Gaussian goal distributions ---------------------------------------- */

typedef struct disco_gaussian disco_gaussian;

/* Fits mean/covariance to `count` states of width `dim` (row-major), adding
 * i.i.d. Gaussian noise of `noise_std` drawn from `seed`, then attaches the
 * smoothed precision (condition cap `kappa_max`, threshold `epsilon`). */
disco_status disco_gaussian_fit(const double* states, int count, int dim,
                                double noise_std, uint64_t seed, double epsilon,
                                double kappa_max, disco_gaussian** out);
disco_status disco_gaussian_load(const char* path, disco_gaussian** out);
disco_status disco_gaussian_save(const disco_gaussian* params, const char* path);
void disco_gaussian_free(disco_gaussian* params);
int disco_gaussian_dim(const disco_gaussian* params);
disco_status disco_gaussian_mean(const disco_gaussian* params, double* out,
                                 int capacity);
/* Row-major smoothed precision, dim*dim entries. */
disco_status disco_gaussian_precision(const disco_gaussian* params, double* out,
                                      int capacity);
/* r(s) = -0.5 (s - mean)^T P (s - mean); zero at the mean. */
disco_status disco_gaussian_reward(const disco_gaussian* params, const double* state,
                                   int length, double* out);
/* 1 when thresholding kept the precision positive semi-definite. */
int disco_gaussian_precision_psd(const disco_gaussian* params);

/* --- command-level operations ------------------------------------------- */

/* Writes subtask_<i>.json (paired example sets) for i in [0, subtask_count). */
disco_status disco_gen_examples(const char* out_dir, int m_objects, int subtask_count,
                                int k, double noise_std, uint64_t seed);

/* model: "gaussian" | "gmm" | "latent" | "joint". Prints nothing; the
 * summary is written to *summary (caller frees with disco_string_free) when
 * summary is non-NULL. */
disco_status disco_fit_file(const char* model, const char* examples_path,
                            const char* params_out_path, double epsilon,
                            double kappa_max, uint64_t seed, int gmm_components,
                            int latent_dim, uint64_t encoder_seed, char** summary);

/* Validates the config (preset: "desk-scale", "paper-scale" or NULL) and, if
 * dry_run is 0, trains one seed and writes metrics/summary/checkpoint under
 * <out_dir>/seed<seed>/. A negative seed uses the first seed in the config.
 * variant ("disco" | "conditional-disco" | "her"), model ("gaussian" | "gmm" |
 * "latent") and out_dir override the config when non-NULL. */
disco_status disco_train(const char* config_path, const char* preset,
                         const char* variant, const char* model, int64_t seed,
                         const char* out_dir, int dry_run);

/* Re-evaluates a finished run directory with a fresh seed; writes a metric
 * CSV to out_csv when non-NULL. */
disco_status disco_eval(const char* run_dir, uint64_t eval_seed, int episodes,
                        const char* out_csv);

/* Runs the three relabeling arms (full, no-mean, no-covariance) at one seed. */
disco_status disco_ablate(const char* config_path, const char* preset, int64_t seed,
                          const char* out_dir);

/* Aggregates per-seed metric CSVs (same configuration) into mean/std curves. */
disco_status disco_export(const char* const* csv_paths, int count,
                          const char* out_path);

void disco_string_free(char* text);

#ifdef __cplusplus
}
#endif

#endif /* DISCO_DISCO_H_ */
