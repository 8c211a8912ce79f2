#ifndef FEDKL_H
#define FEDKL_H

/* Generated by cbindgen from the fedkl-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible entry point.
typedef enum FedklStatus {
  FEDKL_STATUS_OK = 0,
  FEDKL_STATUS_NULL_POINTER = 1,
  FEDKL_STATUS_INVALID_ARGUMENT = 2,
  FEDKL_STATUS_PARSE_ERROR = 3,
  FEDKL_STATUS_SOLVER_ERROR = 4,
  FEDKL_STATUS_UNREACHABLE_STATE = 5,
  FEDKL_STATUS_IO_ERROR = 6,
  FEDKL_STATUS_PANIC = 7,
} FedklStatus;

// Opaque finite-MDP handle.
typedef struct FedklMdp FedklMdp;

// Opaque tabular-policy handle.
typedef struct FedklPolicy FedklPolicy;

// Per-agent heterogeneity summary (plain data, C layout).
typedef struct FedklAgentReport {
  double b_norm;
  double a_norm;
  double g_scaled;
  double alpha;
  double delta;
  double epsilon;
} FedklAgentReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buffer` (truncated,
// always NUL-terminated) and returns the full message length in bytes.
size_t fedkl_last_error_message(char *buffer, size_t capacity);

// Frees a string returned by this library.
void fedkl_string_free(char *text);

// Parses an MDP from its JSON document form.
enum FedklStatus fedkl_mdp_from_json(const char *json, struct FedklMdp **out);

// Reads an MDP JSON document from disk.
enum FedklStatus fedkl_mdp_from_file(const char *path, struct FedklMdp **out);

// Serializes the MDP back to its JSON form (17 significant digits).
enum FedklStatus fedkl_mdp_to_json(const struct FedklMdp *mdp, char **out);

void fedkl_mdp_free(struct FedklMdp *mdp);

size_t fedkl_mdp_n_states(const struct FedklMdp *mdp);

size_t fedkl_mdp_n_actions(const struct FedklMdp *mdp);

double fedkl_mdp_gamma(const struct FedklMdp *mdp);

// Uniform policy over `n_actions` in every state.
enum FedklStatus fedkl_policy_uniform(size_t n_states, size_t n_actions, struct FedklPolicy **out);

// Builds a policy from a row-major `n_states x n_actions` probability table.
enum FedklStatus fedkl_policy_from_rows(const double *probs,
                                        size_t n_states,
                                        size_t n_actions,
                                        struct FedklPolicy **out);

// Copies the policy table into `out` (row-major, `n_states * n_actions`).
enum FedklStatus fedkl_policy_get_rows(const struct FedklPolicy *policy, double *out);

void fedkl_policy_free(struct FedklPolicy *policy);

// Expected discounted return `eta = mu . V`.
enum FedklStatus fedkl_expected_return(const struct FedklMdp *mdp,
                                       const struct FedklPolicy *policy,
                                       double *out);

// State values V (buffer of `n_states`).
enum FedklStatus fedkl_state_values(const struct FedklMdp *mdp,
                                    const struct FedklPolicy *policy,
                                    double *out_v);

// Advantage table A (row-major buffer of `n_states * n_actions`).
enum FedklStatus fedkl_advantages(const struct FedklMdp *mdp,
                                  const struct FedklPolicy *policy,
                                  double *out);

// Unnormalized discounted visitation frequencies (buffer of `n_states`).
enum FedklStatus fedkl_visitation(const struct FedklMdp *mdp,
                                  const struct FedklPolicy *policy,
                                  double *out);

// Policy advantage of `cand` over `base`.
enum FedklStatus fedkl_policy_advantage(const struct FedklMdp *mdp,
                                        const struct FedklPolicy *base,
                                        const struct FedklPolicy *cand,
                                        double *out);

// Monte-Carlo mean episode return, seeded and reproducible.
enum FedklStatus fedkl_mc_return(const struct FedklMdp *mdp,
                                 const struct FedklPolicy *policy,
                                 size_t n_episodes,
                                 size_t horizon,
                                 uint64_t seed,
                                 double *out);

// Per-agent heterogeneity report for a family of MDP handles under a shared
// policy. `out_agents` must hold `n_agents` entries; `out_beta` receives the
// shared trust coefficient.
enum FedklStatus fedkl_heterogeneity_report(const struct FedklMdp *const *family,
                                            const double *weights,
                                            size_t n_agents,
                                            const struct FedklPolicy *policy,
                                            struct FedklAgentReport *out_agents,
                                            double *out_beta);

// Runs the bound-certification sweep; sets `out_all_hold` to 1 when every
// check holds. Sizes fall back to the standard (12 states, 4 actions,
// 5 agents) envelope.
enum FedklStatus fedkl_run_bound_sweep(uint64_t n_seeds,
                                       uint64_t master_seed,
                                       int32_t *out_all_hold);

// Exact federated policy iteration over a family of MDP handles with
// uniform weights. Writes the `rounds + 1` global-return series into
// `out_eta`; the series is non-decreasing by construction.
enum FedklStatus fedkl_run_exact_federation(const struct FedklMdp *const *family,
                                            size_t n_agents,
                                            size_t rounds,
                                            uint64_t master_seed,
                                            double *out_eta);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FEDKL_H */
