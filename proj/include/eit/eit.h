#ifndef EIT_EIT_H
#define EIT_EIT_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes returned by every operation. */
#define EIT_OK 0
#define EIT_ERROR_INVALID_ARGUMENT 1
#define EIT_ERROR_RUNTIME 2
#define EIT_ERROR_IO 3

const char* eit_version(void);

/* Message of the last failed call on this thread; empty after a success. */
const char* eit_last_error(void);
/* Same, as a structured JSON object {"error": {"code": c, "message": m}}. */
const char* eit_last_error_json(void);

/*
 * Artifact bundle: the named text files produced by one operation.  Names are
 * stable and iteration order is deterministic.  eit_artifacts_write emits all
 * files into a directory together with a manifest.json listing each file with
 * its SHA-256 checksum.
 */
typedef struct eit_artifacts eit_artifacts;

int32_t eit_artifacts_count(const eit_artifacts* a);
const char* eit_artifacts_name(const eit_artifacts* a, int32_t index);
/* NULL when no file of that name exists. */
const char* eit_artifacts_content(const eit_artifacts* a, const char* name);
int32_t eit_artifacts_write(const eit_artifacts* a, const char* out_dir);
void eit_artifacts_free(eit_artifacts* a);

/*
 * Operations take a JSON configuration string and return a new artifact
 * bundle through *out (unchanged on failure).  Common keys and defaults:
 *   n            boundary node / electrode count (required)
 *   electrodes   "box" | "bandlimited"              (default "box")
 *   nr, ntheta   fine solver resolution             (default 256, 512)
 *   seed         recorded in provenance             (default 0)
 */

/* {n, hbar (1), mode: "interpolation" | "truncated"} -> grid.json, grid.csv */
int32_t eit_grid(const char* config_json, eit_artifacts** out);

/*
 * {phantom ("none" = unit conductivity), n, electrodes, nr, ntheta,
 *  boundary: {type: "full"} | {type: "one-sided", beta} |
 *            {type: "two-sided", beta}}
 * -> dtn.csv, provenance.json; one-sided adds map.json, correspondence.csv
 */
int32_t eit_forward(const char* config_json, eit_artifacts** out);

/*
 * data_csv / reference_csv hold dense n x n DtN matrices.  Config:
 * {topology: "circular" | "pyramidal" | "two-sided", grid: "optimal" |
 *  "sensitivity", gn_steps (0), electrodes, nr, ntheta}
 * -> network.json, reconstruction.json, reconstruction.csv; gn_steps > 0
 *    (circular only) adds gn_field.csv, gn_trace.csv
 */
int32_t eit_invert(const char* config_json, const char* data_csv, const char* reference_csv,
                   eit_artifacts** out);

/*
 * Full experiment: synthesize the phantom and reference measurements, then
 * invert.  Union of the forward and invert keys plus the grid files.
 */
int32_t eit_run(const char* config_json, eit_artifacts** out);

/*
 * Small-size invariant suite over all modules.  *failures receives the number
 * of failed checks; the bundle carries the pass/fail table (selfcheck.txt).
 * Returns EIT_OK even when checks fail.
 */
int32_t eit_selfcheck(int32_t* failures, eit_artifacts** out);

#ifdef __cplusplus
}
#endif

#endif /* EIT_EIT_H */
