#ifndef ERM_H
#define ERM_H

#pragma once

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ErmStatus {
  ERM_STATUS_OK = 0,
  ERM_STATUS_NULL_POINTER = 1,
  ERM_STATUS_INVALID_ARGUMENT = 2,
  ERM_STATUS_IO = 3,
  ERM_STATUS_PARSE = 4,
  ERM_STATUS_INVALID_DATA = 5,
  ERM_STATUS_TOO_FEW_CLUSTERS = 6,
  ERM_STATUS_SOLVE = 7,
  ERM_STATUS_OUT_OF_RANGE = 8,
  ERM_STATUS_PANIC = 9,
} ErmStatus;

// A merged reflection-point cloud in the scenario frame.
typedef struct ErmCloud ErmCloud;

// A loaded scenario file.
typedef struct ErmScenario ErmScenario;

typedef struct ErmSolution {
  double x;
  double y;
  // Distance from the UE to the reflection point.
  double r_m;
  // Inclination of the reflecting face, radians in (-π/2, π/2].
  double theta_rad;
} ErmSolution;

typedef struct ErmStats {
  double min;
  double max;
  double mean;
  // Population standard deviation.
  double paper_rmse;
  // Root mean square.
  double true_rmse;
} ErmStats;

typedef struct ErmReconstructOptions {
  // Speed of light, m/s.
  double c;
  // Subtract the scenario's antenna gains from MPC powers.
  bool compensate_gains;
  double delay_gap_s;
  double angle_gap_rad;
  // Delay resolution of the measurement, seconds.
  double delay_quantum_s;
  double dedupe_eps_m;
  bool root_find;
} ErmReconstructOptions;

typedef struct ErmCloudPoint {
  double x;
  double y;
  double r_m;
  double theta_rad;
  double power_db;
  size_t cluster_id;
  // Index of an earlier point within the dedupe radius, or -1.
  int64_t duplicate_of;
} ErmCloudPoint;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` and returns
// its length in bytes. Pass a null buffer to query the length.
//
// # Safety
// `buf` must be null or valid for `len` bytes.
size_t erm_last_error_message(char *buf, size_t len);

// Library version, a static NUL-terminated string.
const char *erm_version(void);

// Solves one reflection point with the BS at the origin.
//
// # Safety
// `out` must be null or point to writable memory for one `ErmSolution`.
enum ErmStatus erm_solve_rp(double ue_x,
                            double ue_y,
                            double aoa_rad,
                            double path_len_m,
                            bool root_find,
                            struct ErmSolution *out);

// Perpendicular distance from `(x, y)` to the line `y = a_l x + b_l`.
double erm_point_line_deviation(double x, double y, double a_l, double b_l);

// Summary statistics of `n` deviations.
//
// # Safety
// `devs` must be valid for `n` reads; `out` must be writable.
enum ErmStatus erm_error_stats(const double *devs, size_t n, struct ErmStats *out);

// Loads a scenario JSON file into `*out`.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum ErmStatus erm_scenario_load(const char *path, struct ErmScenario **out);

// # Safety
// `s` must be null or a handle from `erm_scenario_load`, not yet freed.
void erm_scenario_free(struct ErmScenario *s);

// Number of UEs declared in the scenario; 0 for a null handle.
//
// # Safety
// `s` must be null or a live scenario handle.
size_t erm_scenario_ue_count(const struct ErmScenario *s);

// Number of walls in the scenario; 0 for a null handle.
//
// # Safety
// `s` must be null or a live scenario handle.
size_t erm_scenario_wall_count(const struct ErmScenario *s);

// Defaults matching the `erm reconstruct` command.
struct ErmReconstructOptions erm_reconstruct_options_default(void);

// Reads MPCs for `scenario`, reconstructs every UE and merges the result.
// `options` may be null for the defaults.
//
// # Safety
// `scenario` must be a live handle, `mpcs_path` NUL-terminated, `options`
// null or readable, and `out` writable.
enum ErmStatus erm_reconstruct(const struct ErmScenario *scenario,
                               const char *mpcs_path,
                               const struct ErmReconstructOptions *options,
                               struct ErmCloud **out);

// # Safety
// `c` must be null or a handle from `erm_reconstruct`, not yet freed.
void erm_cloud_free(struct ErmCloud *c);

// Number of points; 0 for a null handle.
//
// # Safety
// `c` must be null or a live cloud handle.
size_t erm_cloud_len(const struct ErmCloud *c);

// # Safety
// `c` must be a live cloud handle and `out` writable.
enum ErmStatus erm_cloud_point(const struct ErmCloud *c, size_t index, struct ErmCloudPoint *out);

// Copies the UE id of point `index` into `buf` and returns its length,
// or 0 with the last error set when the index is out of range.
//
// # Safety
// `c` must be a live cloud handle; `buf` null or valid for `len` bytes.
size_t erm_cloud_ue_id(const struct ErmCloud *c, size_t index, char *buf, size_t len);

// Writes the cloud as CSV.
//
// # Safety
// `c` must be a live cloud handle and `path` NUL-terminated.
enum ErmStatus erm_cloud_save(const struct ErmCloud *c, const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ERM_H */
