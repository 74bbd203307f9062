#ifndef IONSPEC_H
#define IONSPEC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>
#include <stdbool.h>

typedef enum IonspecStatus {
  IONSPEC_STATUS_OK = 0,
  IONSPEC_STATUS_NULL_POINTER = 1,
  IONSPEC_STATUS_INVALID_ARGUMENT = 2,
  IONSPEC_STATUS_CONFIG = 3,
  IONSPEC_STATUS_NUMERICAL = 4,
  IONSPEC_STATUS_IO = 5,
  IONSPEC_STATUS_BUFFER_TOO_SMALL = 6,
  IONSPEC_STATUS_PANIC = 7,
} IonspecStatus;

// Spectrum axis selector.
typedef enum IonspecAxis {
  IONSPEC_AXIS_A = 0,
  IONSPEC_AXIS_B = 1,
} IonspecAxis;

// Spin dephasing model selector for [`ionspec_gate_fidelity`].
typedef enum IonspecSpinNoise {
  IONSPEC_SPIN_NOISE_NONE = 0,
  IONSPEC_SPIN_NOISE_LOCAL = 1,
  IONSPEC_SPIN_NOISE_COLLECTIVE = 2,
} IonspecSpinNoise;

// Trapped-ion chain with its single-exciton eigenmodes.
typedef struct IonspecChain IonspecChain;

// Parsed and resolved experiment config.
typedef struct IonspecConfig IonspecConfig;

// Complex 2D spectrum on two uniform frequency axes.
typedef struct IonspecSpectrum IonspecSpectrum;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL after a success.
// The pointer stays valid until the next ionspec call on the same thread.
const char *ionspec_last_error(void);

// Library version as a static NUL-terminated string.
const char *ionspec_version(void);

// Frees a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must come from an ionspec function that transfers ownership and must not be freed twice.
void ionspec_string_free(char *s);

// Builds an `n_ions` chain with coupling `beta` and anharmonicity `u`.
//
// # Safety
// `out` must be a valid pointer to writable handle storage.
enum IonspecStatus ionspec_chain_new(size_t n_ions,
                                     double beta,
                                     double u,
                                     struct IonspecChain **out);

// # Safety
// `chain` must be NULL or a handle from [`ionspec_chain_new`] not yet freed.
void ionspec_chain_free(struct IonspecChain *chain);

// # Safety
// `chain` must be a live handle and `out` writable.
enum IonspecStatus ionspec_chain_n_ions(const struct IonspecChain *chain, size_t *out);

// Exciton frequencies (ascending) into `buf[..n_ions]`.
//
// # Safety
// `chain` must be a live handle and `buf` must hold `len` writable doubles.
enum IonspecStatus ionspec_chain_frequencies(const struct IonspecChain *chain,
                                             double *buf,
                                             size_t len);

// Site amplitudes of exciton `mode` into `buf[..n_ions]`.
//
// # Safety
// `chain` must be a live handle and `buf` must hold `len` writable doubles.
enum IonspecStatus ionspec_chain_mode(const struct IonspecChain *chain,
                                      size_t mode,
                                      double *buf,
                                      size_t len);

// Parses and resolves a JSON experiment config.
//
// # Safety
// `json` must be a NUL-terminated string and `out` writable.
enum IonspecStatus ionspec_config_from_json(const char *json, struct IonspecConfig **out);

// Loads a shipped preset by name.
//
// # Safety
// `name` must be a NUL-terminated string and `out` writable.
enum IonspecStatus ionspec_config_from_preset(const char *name, struct IonspecConfig **out);

// # Safety
// `config` must be NULL or a live handle not yet freed.
void ionspec_config_free(struct IonspecConfig *config);

// Resolved config as pretty JSON; release with [`ionspec_string_free`].
//
// # Safety
// `config` must be a live handle and `out` writable.
enum IonspecStatus ionspec_config_resolved_json(const struct IonspecConfig *config, char **out);

// Runs the experiment and writes all artifacts to `out_dir`.
//
// # Safety
// `config` must be a live handle and `out_dir` a NUL-terminated path.
enum IonspecStatus ionspec_run(const struct IonspecConfig *config, const char *out_dir);

// Computes the 2D spectrum of an `sqc`, `dqc` or `spins-lineshape` config in memory.
//
// # Safety
// `config` must be a live handle and `out` writable.
enum IonspecStatus ionspec_spectrum_compute(const struct IonspecConfig *config,
                                            struct IonspecSpectrum **out);

// # Safety
// `spectrum` must be NULL or a live handle not yet freed.
void ionspec_spectrum_free(struct IonspecSpectrum *spectrum);

// Number of bins along each axis.
//
// # Safety
// `spectrum` must be a live handle; `n_a` and `n_b` writable.
enum IonspecStatus ionspec_spectrum_shape(const struct IonspecSpectrum *spectrum,
                                          size_t *n_a,
                                          size_t *n_b);

// Frequency values of one axis.
//
// # Safety
// `spectrum` must be a live handle and `buf` must hold `len` writable doubles.
enum IonspecStatus ionspec_spectrum_axis(const struct IonspecSpectrum *spectrum,
                                         enum IonspecAxis axis,
                                         double *buf,
                                         size_t len);

// Real and imaginary parts in row-major order (`index = a * n_b + b`).
//
// # Safety
// `spectrum` must be a live handle; `re` and `im` must each hold `len` writable doubles.
enum IonspecStatus ionspec_spectrum_values(const struct IonspecSpectrum *spectrum,
                                           double *re,
                                           double *im,
                                           size_t len);

// Fidelity of the Mølmer-Sørensen gate with coupling `omega` under dephasing `gamma`.
//
// # Safety
// `out` must be writable.
enum IonspecStatus ionspec_gate_fidelity(double omega,
                                         double gamma,
                                         enum IonspecSpinNoise noise,
                                         double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IONSPEC_H */
