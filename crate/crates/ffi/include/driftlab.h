#ifndef DRIFTLAB_H
#define DRIFTLAB_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/*
 Result codes.
 */
typedef enum DlStatus {
  DL_STATUS_OK = 0,
  DL_STATUS_NULL_POINTER = 1,
  DL_STATUS_INVALID_UTF8 = 2,
  DL_STATUS_CONFIG = 3,
  DL_STATUS_PRECONDITION = 4,
  DL_STATUS_STEP_TOO_LARGE = 5,
  DL_STATUS_IO = 6,
  DL_STATUS_BUFFER_TOO_SMALL = 7,
  DL_STATUS_OUT_OF_RANGE = 8,
  DL_STATUS_PANIC = 9,
} DlStatus;

/*
 Parsed and validated run configuration.
 */
typedef struct DlConfig DlConfig;

/*
 One or more verification reports from a single check.
 */
typedef struct DlReport DlReport;

/*
 Solver output.
 */
typedef struct DlTrajectory DlTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failure on this thread, or null after a success.
 The pointer stays valid until the next call on the same thread.
 */
const char *dl_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *dl_version(void);

/*
 The default configuration.

 # Safety
 `out` must be valid for writes.
 */
enum DlStatus dl_config_default(struct DlConfig **out);

/*
 Parses and validates `key = value` configuration text.

 # Safety
 `text` must be a NUL-terminated string and `out` valid for writes.
 */
enum DlStatus dl_config_parse(const char *text, struct DlConfig **out);

/*
 Releases a configuration; null is ignored.

 # Safety
 `cfg` must come from this library and not be used afterwards.
 */
void dl_config_free(struct DlConfig *cfg);

/*
 Runs the solver at `refine`-fold resolution (1 for the configured grid).

 # Safety
 `cfg` must be a live handle and `out` valid for writes.
 */
enum DlStatus dl_solve(const struct DlConfig *cfg, uintptr_t refine, struct DlTrajectory **out);

/*
 Releases a trajectory; null is ignored.

 # Safety
 `t` must come from this library and not be used afterwards.
 */
void dl_trajectory_free(struct DlTrajectory *t);

/*
 Number of stored time levels (`steps + 1`).

 # Safety
 `t` must be a live handle and `out` valid for writes.
 */
enum DlStatus dl_trajectory_levels(const struct DlTrajectory *t, uintptr_t *out);

/*
 Time and kinetic energy `1/2 ||v||^2` at a level.

 # Safety
 `t` must be a live handle; `time` and `kinetic` valid for writes.
 */
enum DlStatus dl_trajectory_energy(const struct DlTrajectory *t,
                                   uintptr_t level,
                                   double *time,
                                   double *kinetic);

/*
 SHA-256 configuration hash of the run, as hex.

 # Safety
 `t` must be a live handle; `buf` must hold `cap` bytes.
 */
enum DlStatus dl_trajectory_config_hash(const struct DlTrajectory *t,
                                        char *buf,
                                        uintptr_t cap,
                                        uintptr_t *needed);

/*
 Writes velocity, pressure and manifest files under `dir`.

 # Safety
 `t` must be a live handle and `dir` a NUL-terminated path.
 */
enum DlStatus dl_trajectory_save(const struct DlTrajectory *t, const char *dir);

/*
 Runs one named check (`rh`, `llogl`, `stein`, `cz`, `mazver`, `energy`,
 `caccioppoli`, `iteration`, `identity`, `pressure`).

 # Safety
 `cfg` must be a live handle, `which` NUL-terminated, `out` valid for writes.
 */
enum DlStatus dl_verify(const struct DlConfig *cfg, const char *which, struct DlReport **out);

/*
 Releases a report set; null is ignored.

 # Safety
 `r` must come from this library and not be used afterwards.
 */
void dl_report_free(struct DlReport *r);

/*
 Number of reports in the set (one per exponent for sweeps).

 # Safety
 `r` must be a live handle and `out` valid for writes.
 */
enum DlStatus dl_report_count(const struct DlReport *r, uintptr_t *out);

/*
 Whether every report in the set passes.

 # Safety
 `r` must be a live handle and `out` valid for writes.
 */
enum DlStatus dl_report_pass(const struct DlReport *r, bool *out);

/*
 Report `index` serialized as JSON.

 # Safety
 `r` must be a live handle; `buf` must hold `cap` bytes.
 */
enum DlStatus dl_report_json(const struct DlReport *r,
                             uintptr_t index,
                             char *buf,
                             uintptr_t cap,
                             uintptr_t *needed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DRIFTLAB_H */
