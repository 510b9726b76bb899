#ifndef LANDAU_H
#define LANDAU_H

#include <stddef.h>
#include <stdint.h>

typedef enum LandauStatus {
  LANDAU_STATUS_OK = 0,
  LANDAU_STATUS_NULL_POINTER = 1,
  LANDAU_STATUS_INVALID_ARGUMENT = 2,
  LANDAU_STATUS_DOMAIN = 3,
  LANDAU_STATUS_ACCURACY = 4,
  LANDAU_STATUS_TRUNCATION = 5,
  LANDAU_STATUS_BUFFER_TOO_SMALL = 6,
  LANDAU_STATUS_PANIC = 7,
} LandauStatus;

typedef enum LandauUnits {
  LANDAU_UNITS_SI = 0,
  LANDAU_UNITS_GAUSSIAN = 1,
  LANDAU_UNITS_NATURAL = 2,
} LandauUnits;

// Factorized evolution operator at one time.
typedef struct LandauPropagator LandauPropagator;

// Charged particle in a uniform magnetic field.
typedef struct LandauSystem LandauSystem;

// In-plane electric field waveform.
typedef struct LandauWaveform LandauWaveform;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` (NUL
// terminated, truncated to `len`). Returns the full message length without
// the terminator.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t landau_last_error(char *buf, size_t len);

// Charge, field and mass in the units of `units`.
//
// # Safety
// `out` must be a valid pointer.
enum LandauStatus landau_system_new(double charge,
                                    double magnetic_field,
                                    double mass,
                                    enum LandauUnits units,
                                    struct LandauSystem **out);

// Electron in `field_tesla`, SI units.
//
// # Safety
// `out` must be a valid pointer.
enum LandauStatus landau_system_electron_si(double field_tesla, struct LandauSystem **out);

// # Safety
// `sys` must come from this library and not be used afterwards.
void landau_system_free(struct LandauSystem *sys);

// Writes ω, l_B and k.
//
// # Safety
// All pointers must be valid.
enum LandauStatus landau_system_scales(const struct LandauSystem *sys,
                                       double *omega,
                                       double *magnetic_length,
                                       double *ladder_scale);

// # Safety
// `out` must be a valid pointer.
enum LandauStatus landau_waveform_constant(double e1, double e2, struct LandauWaveform **out);

// E(t) = E0·e^{i(φ − νt)}.
//
// # Safety
// `out` must be a valid pointer.
enum LandauStatus landau_waveform_rotating(double amplitude,
                                           double frequency,
                                           double phase,
                                           struct LandauWaveform **out);

// Piecewise-linear field through `len` samples (t, E1, E2).
//
// # Safety
// The three arrays must each hold `len` values; `out` must be valid.
enum LandauStatus landau_waveform_sampled(const double *times,
                                          const double *e1,
                                          const double *e2,
                                          size_t len,
                                          struct LandauWaveform **out);

// Any waveform from its JSON description, e.g.
// `{"type": "linear_sinusoid", "amplitude": 1, "direction": 0, "frequency": 2}`.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be valid.
enum LandauStatus landau_waveform_from_json(const char *json, struct LandauWaveform **out);

// # Safety
// `w` must come from this library and not be used afterwards.
void landau_waveform_free(struct LandauWaveform *w);

// U(t, 0) with a Fock space of `truncation` states (0 picks the default).
//
// # Safety
// All pointers must be valid.
enum LandauStatus landau_propagator_assemble(const struct LandauSystem *sys,
                                             const struct LandauWaveform *w,
                                             double t,
                                             size_t truncation,
                                             struct LandauPropagator **out);

// # Safety
// `p` must come from this library and not be used afterwards.
void landau_propagator_free(struct LandauPropagator *p);

// Fock-space dimension, or 0 for a null handle.
//
// # Safety
// `p` must be null or valid.
size_t landau_propagator_dimension(const struct LandauPropagator *p);

// Writes R, β, u and γ (complex values as re/im pairs).
//
// # Safety
// `p` and `out` must be valid; `out` holds 6 doubles
// [R_re, R_im, β, u_re, u_im, γ].
enum LandauStatus landau_propagator_parameters(const struct LandauPropagator *p, double *out);

// ⟨m|J|n⟩ including the e^{iγ} phase.
//
// # Safety
// All pointers must be valid.
enum LandauStatus landau_propagator_j_element(const struct LandauPropagator *p,
                                              size_t m,
                                              size_t n,
                                              double *re,
                                              double *im);

// P(n → m) for m = 0..dimension−1.
//
// # Safety
// `out` must hold `len` doubles.
enum LandauStatus landau_propagator_transitions(const struct LandauPropagator *p,
                                                size_t n,
                                                double *out,
                                                size_t len);

// Ground-state survival e^{−|uk|²} for a resonant rotating field.
//
// # Safety
// All pointers must be valid.
enum LandauStatus landau_resonance_survival(const struct LandauSystem *sys,
                                            double amplitude,
                                            double t,
                                            double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LANDAU_H */
