#ifndef FLUXTHEO_H
#define FLUXTHEO_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FluxStatus {
  FLUX_STATUS_OK = 0,
  FLUX_STATUS_NULL_POINTER = 1,
  FLUX_STATUS_INVALID_ARGUMENT = 2,
  FLUX_STATUS_DIMENSION_MISMATCH = 3,
  FLUX_STATUS_DOMAIN = 4,
  FLUX_STATUS_NUMERICAL = 5,
  FLUX_STATUS_IO = 6,
  FLUX_STATUS_BUFFER_TOO_SMALL = 7,
  FLUX_STATUS_PANIC = 8,
} FluxStatus;

// Result of one simulated anneal.
typedef struct FluxAnnealRun FluxAnnealRun;

// Two-qubit master-equation anneal description.
typedef struct FluxAnnealSpec FluxAnnealSpec;

// Measure-evolve-measure protocol.
typedef struct FluxProtocol FluxProtocol;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, empty if none. Valid
// until the next call into the library from the same thread.
const char *flux_last_error(void);

// Library version, a static string.
const char *flux_version(void);

// Two qubits with fields `h`, coupling `j`, anneal time in microseconds,
// inverse temperature in 1/GHz and bath coupling `kappa`.
enum FluxStatus flux_anneal_spec_two_qubit(double h,
                                           double j,
                                           double t_f_us,
                                           double beta,
                                           double kappa,
                                           struct FluxAnnealSpec **out);

// Anneal spec from its JSON form. Schedule files are resolved against the
// working directory.
enum FluxStatus flux_anneal_spec_from_json(const char *json, struct FluxAnnealSpec **out);

// Hilbert-space dimension, 0 for a null handle.
uintptr_t flux_anneal_spec_dim(const struct FluxAnnealSpec *spec);

void flux_anneal_spec_free(struct FluxAnnealSpec *spec);

// Integrates the anneal from the Gibbs state of `H(0)`. `ode_tol <= 0`
// selects the default local error target.
enum FluxStatus flux_anneal_simulate(const struct FluxAnnealSpec *spec,
                                     double ode_tol,
                                     struct FluxAnnealRun **out);

// Final occupations of the computational basis states, qubit 0 as the most
// significant bit.
enum FluxStatus flux_anneal_run_occupations(const struct FluxAnnealRun *run,
                                            double *out,
                                            uintptr_t len,
                                            uintptr_t *required);

// `<v> = beta(<epsilon(t_f)> - <epsilon(0)> - Delta F)`.
enum FluxStatus flux_anneal_run_mean_v(const struct FluxAnnealRun *run, double *out);

// Both sides of the exponential-average identity: the average over the
// transition statistics and `Tr[rho_G(t_f) E(1)]`.
enum FluxStatus flux_anneal_run_efficacy(const struct FluxAnnealRun *run, double *lhs, double *rhs);

// Transition probabilities `p(beta|alpha)` between energy eigenstates,
// row-major with rows indexed by the final level.
enum FluxStatus flux_anneal_run_transitions(const struct FluxAnnealRun *run,
                                            double *out,
                                            uintptr_t len,
                                            uintptr_t *required);

void flux_anneal_run_free(struct FluxAnnealRun *run);

// Protocol from the JSON `protocol` block of a scenario file.
enum FluxStatus flux_protocol_from_json(const char *json, struct FluxProtocol **out);

// `gamma = <e^{-v}>` for `v = ln(p_alpha / q_beta)`.
enum FluxStatus flux_protocol_efficacy(const struct FluxProtocol *p, double *out);

enum FluxStatus flux_protocol_mean_v(const struct FluxProtocol *p, double *out);

// `<e^{lambda v}>` over the forward distribution.
enum FluxStatus flux_protocol_mgf(const struct FluxProtocol *p, double lambda, double *out);

void flux_protocol_free(struct FluxProtocol *p);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FLUXTHEO_H */
