#ifndef TRUNK_H
#define TRUNK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TrunkPattern {
  TRUNK_PATTERN_LINEAR_EXTENSION = 0,
  TRUNK_PATTERN_C_SHAPED = 1,
  TRUNK_PATTERN_J_SHAPED = 2,
  TRUNK_PATTERN_S_SHAPED = 3,
  TRUNK_PATTERN_HELICAL_CLOCKWISE = 4,
  TRUNK_PATTERN_HELICAL_COUNTER_CLOCKWISE = 5,
  TRUNK_PATTERN_SPIRAL = 6,
  TRUNK_PATTERN_UNCLASSIFIED = 7,
} TrunkPattern;

typedef enum TrunkStatus {
  TRUNK_STATUS_OK = 0,
  TRUNK_STATUS_NULL_POINTER = 1,
  TRUNK_STATUS_INVALID_ARGUMENT = 2,
  TRUNK_STATUS_NOT_CONVERGED = 3,
  TRUNK_STATUS_BUFFER_TOO_SMALL = 4,
  TRUNK_STATUS_PANIC = 5,
} TrunkStatus;

// Live rod simulation; create with [`trunk_sim_new`], release with
// [`trunk_sim_free`].
typedef struct TrunkSim TrunkSim;

// Rig parameters, SI units; `dip_angle_deg` in degrees.
typedef struct TrunkParams {
  double inner_diameter;
  double outer_diameter;
  double rest_length;
  double youngs_modulus;
  double actuation_mass;
  double gravity;
  double top_shaft_spacing;
  double bottom_shaft_spacing;
  double dip_angle_deg;
  double marker_offset;
} TrunkParams;

// Operator command: twist in degrees, pressures in Pa, thread lengths in m.
typedef struct TrunkControl {
  double theta_left_deg;
  double theta_right_deg;
  double pressure_left;
  double pressure_right;
  double thread_length_left;
  double thread_length_right;
} TrunkControl;

// Measured marker position at one pressure.
typedef struct TrunkObservation {
  double pressure;
  double tip[3];
} TrunkObservation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next call into this library on the same thread.
const char *trunk_last_error_message(void);

// # Safety
// `out` must be null or point to writable memory for one `TrunkParams`.
enum TrunkStatus trunk_params_default(struct TrunkParams *out);

// Actuator length under equal pressure `pressure` in both tubes, m.
//
// # Safety
// Pointers must be null or valid for one element.
enum TrunkStatus trunk_linear_extension_length(const struct TrunkParams *params,
                                               double pressure,
                                               double *out_length);

// Closed-form C-bend marker position, m, written as x, y, z.
//
// # Safety
// `params` valid for one element, `out_tip` valid for three doubles.
enum TrunkStatus trunk_c_bend_tip(const struct TrunkParams *params,
                                  double pressure,
                                  double k,
                                  double *out_tip);

// # Safety
// Pointers must be null or valid for one element.
enum TrunkStatus trunk_classify_pattern(const struct TrunkParams *params,
                                        const struct TrunkControl *control,
                                        double angle_tol_deg,
                                        enum TrunkPattern *out_pattern);

// Least-squares outer-edge spring constant over `[k_min, k_max]`, N/m.
//
// # Safety
// `observations` must point to `count` elements; other pointers valid for
// one element. `out_residual` may be null.
enum TrunkStatus trunk_fit_spring_constant(const struct TrunkParams *params,
                                           const struct TrunkObservation *observations,
                                           size_t count,
                                           double k_min,
                                           double k_max,
                                           double *out_k,
                                           double *out_residual);

// Relaxed rig in equilibrium with `segments` segments per tube, using the
// tube-wall material. Gravity is on when `gravity` is nonzero.
//
// # Safety
// `params` valid for one element, `out_sim` writable.
enum TrunkStatus trunk_sim_new(const struct TrunkParams *params,
                               size_t segments,
                               int32_t gravity,
                               struct TrunkSim **out_sim);

// # Safety
// `sim` must come from [`trunk_sim_new`] and not be used afterwards.
void trunk_sim_free(struct TrunkSim *sim);

// Solve for `control` starting from the current state. Returns
// `NotConverged` (state still updated) when the tolerance was not met.
//
// # Safety
// `sim` from [`trunk_sim_new`], `control` valid for one element.
enum TrunkStatus trunk_sim_apply_control(struct TrunkSim *sim, const struct TrunkControl *control);

// Marker position of the current state, m, as x, y, z.
//
// # Safety
// `sim` from [`trunk_sim_new`], `out_tip` valid for three doubles.
enum TrunkStatus trunk_sim_tip(const struct TrunkSim *sim, double *out_tip);

// Number of mean-centerline points (segments + 1).
//
// # Safety
// `sim` from [`trunk_sim_new`], `out_count` writable.
enum TrunkStatus trunk_sim_node_count(const struct TrunkSim *sim, size_t *out_count);

// Copy the mean centerline, base first, into `out_xyz` as consecutive
// x, y, z triples. `capacity` is the number of points `out_xyz` can hold.
//
// # Safety
// `sim` from [`trunk_sim_new`], `out_xyz` valid for `3 * capacity` doubles.
enum TrunkStatus trunk_sim_centerline(const struct TrunkSim *sim, double *out_xyz, size_t capacity);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRUNK_H */
