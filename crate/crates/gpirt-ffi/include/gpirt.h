/* C interface to the gpirt library. All handles are opaque; every call returning GpirtStatus sets a thread-local message readable via gpirt_last_error_message on failure. */

#ifndef GPIRT_H
#define GPIRT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum GpirtStatus {
  GpirtStatus_Ok = 0,
  // A required pointer argument was null.
  GpirtStatus_NullArgument = 1,
  // A string argument was not valid UTF-8.
  GpirtStatus_InvalidUtf8 = 2,
  // Input data or options were rejected.
  GpirtStatus_InvalidArgument = 3,
  // File could not be read or written.
  GpirtStatus_IoError = 4,
  // A numerical routine failed.
  GpirtStatus_NumericalError = 5,
  // Unexpected internal failure.
  GpirtStatus_Internal = 6,
} GpirtStatus;

// One adaptive-testing session over a fixed response-function table.
typedef struct GpirtCatSession GpirtCatSession;

// A fitted (or loaded) sampler chain.
typedef struct GpirtChain GpirtChain;

// Posterior-mean item response functions on a grid.
typedef struct GpirtIrfTable GpirtIrfTable;

// A loaded response matrix.
typedef struct GpirtMatrix GpirtMatrix;

// Sampler options. Obtain defaults from [`gpirt_fit_options_default`]
// and override fields as needed.
typedef struct GpirtFitOptions {
  uint64_t seed;
  size_t iterations;
  size_t burn_in;
  size_t thin;
  // Polynomial degree of the prior mean: 0, 1, or 2.
  size_t mean_degree;
  double grid_lower;
  double grid_upper;
  double grid_step;
  double mh_proposal_sd;
} GpirtFitOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the most recent failure on this thread. The pointer
// stays valid until the next failing call on the same thread.
const char *gpirt_last_error_message(void);

// Library version as a static string.
const char *gpirt_version(void);

// Load, recode, and validate a response CSV. `zero_one_coding` selects
// the 0/1 input coding instead of -1/+1.
enum GpirtStatus gpirt_matrix_load_csv(const char *path,
                                       bool zero_one_coding,
                                       struct GpirtMatrix **out);

// Respondent and item counts of a matrix.
enum GpirtStatus gpirt_matrix_dims(const struct GpirtMatrix *matrix,
                                   size_t *n_respondents,
                                   size_t *n_items);

void gpirt_matrix_free(struct GpirtMatrix *matrix);

// Fill `out` with the default sampler options.
enum GpirtStatus gpirt_fit_options_default(struct GpirtFitOptions *out);

// Run the full sampler on a matrix.
enum GpirtStatus gpirt_fit(const struct GpirtMatrix *matrix,
                           const struct GpirtFitOptions *options,
                           struct GpirtChain **out);

// Write a chain artifact.
enum GpirtStatus gpirt_chain_save(const struct GpirtChain *chain, const char *path);

// Read a chain artifact.
enum GpirtStatus gpirt_chain_load(const char *path, struct GpirtChain **out);

// Stored state count and respondent count of a chain.
enum GpirtStatus gpirt_chain_dims(const struct GpirtChain *chain,
                                  size_t *n_states,
                                  size_t *n_respondents,
                                  size_t *n_items);

// Posterior mean and sample standard deviation of every latent score.
// Both output buffers must hold at least the respondent count; `reflect`
// resolves the reflective ambiguity first.
enum GpirtStatus gpirt_chain_theta(const struct GpirtChain *chain,
                                   bool reflect,
                                   double *out_means,
                                   double *out_sds);

void gpirt_chain_free(struct GpirtChain *chain);

// Posterior-mean response functions of a chain; `reflect` resolves the
// reflective ambiguity first.
enum GpirtStatus gpirt_estimate_irfs(const struct GpirtChain *chain,
                                     bool reflect,
                                     struct GpirtIrfTable **out);

// Write a response-function table as CSV.
enum GpirtStatus gpirt_irf_save_csv(const struct GpirtIrfTable *irfs, const char *path);

// Read a response-function table written by `gpirt_irf_save_csv`.
enum GpirtStatus gpirt_irf_load_csv(const char *path, struct GpirtIrfTable **out);

// Item count and grid size of a table.
enum GpirtStatus gpirt_irf_dims(const struct GpirtIrfTable *irfs,
                                size_t *n_items,
                                size_t *grid_size);

// Positive-response probability for one item at a latent score, by
// linear interpolation on the grid.
enum GpirtStatus gpirt_irf_prob(const struct GpirtIrfTable *irfs,
                                size_t item,
                                double theta,
                                double *out);

void gpirt_irf_free(struct GpirtIrfTable *irfs);

// Open an adaptive session over a table. The belief starts at the
// standard-normal prior and every item is available once.
enum GpirtStatus gpirt_cat_new(const struct GpirtIrfTable *irfs, struct GpirtCatSession **out);

// Index of the highest-information item not yet administered.
enum GpirtStatus gpirt_cat_select(const struct GpirtCatSession *session, size_t *out_item);

// Record a response (+1 or -1) to an item and update the belief. The
// item leaves the available set.
enum GpirtStatus gpirt_cat_respond(struct GpirtCatSession *session, size_t item, int8_t response);

// Posterior mean and standard deviation of the session belief.
enum GpirtStatus gpirt_cat_estimate(const struct GpirtCatSession *session,
                                    double *out_mean,
                                    double *out_sd);

void gpirt_cat_free(struct GpirtCatSession *session);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GPIRT_H */
