#ifndef IK_FFI_H
#define IK_FFI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IkLift {
  IK_LIFT_A = 0,
  IK_LIFT_M = 1,
} IkLift;

/**
 * Solver outcome stored in a result handle.
 */
typedef enum IkOutcome {
  IK_OUTCOME_OPTIMAL = 0,
  IK_OUTCOME_INFEASIBLE = 1,
  IK_OUTCOME_GAP_LIMIT = 2,
  IK_OUTCOME_TIME_LIMIT = 3,
  IK_OUTCOME_NODE_LIMIT = 4,
} IkOutcome;

/**
 * Return code of every fallible call.
 */
typedef enum IkStatus {
  IK_STATUS_OK = 0,
  IK_STATUS_NULL_POINTER = 1,
  IK_STATUS_INVALID_ARGUMENT = 2,
  IK_STATUS_PARSE = 3,
  IK_STATUS_SOLVER = 4,
  IK_STATUS_NO_SOLUTION = 5,
  IK_STATUS_BUFFER_TOO_SMALL = 6,
  IK_STATUS_PANIC = 7,
} IkStatus;

/**
 * Opaque chain handle.
 */
typedef struct IkChain IkChain;

/**
 * Opaque result handle.
 */
typedef struct IkSolveResult IkSolveResult;

typedef struct IkSolveOptions {
  double gap_rel;
  double gap_abs;
  /**
   * Seconds.
   */
  double time_limit;
  uint64_t node_limit;
  uint32_t threads;
  /**
   * An [`IkLift`] value; anything else is rejected.
   */
  uint32_t lift;
  /**
   * Non-zero to seed the search with a local solution.
   */
  uint8_t warm_start;
} IkSolveOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty when none. Valid until the next
 * call into this library from the same thread.
 */
const char *ik_last_error_message(void);

/**
 * Parses a chain from its JSON description (`{"links": [...], "split": k}`).
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a writable pointer.
 */
enum IkStatus ik_chain_from_json(const char *json, struct IkChain **out);

/**
 * # Safety
 * `chain` must be null or a handle from [`ik_chain_from_json`] not yet freed.
 */
void ik_chain_free(struct IkChain *chain);

/**
 * # Safety
 * `chain` must be a live handle and `out` writable.
 */
enum IkStatus ik_chain_dof(const struct IkChain *chain, size_t *out);

/**
 * Writes the end-effector pose for `angles` (length `len`) into `out_pose` (16 doubles).
 *
 * # Safety
 * `angles` must hold `len` doubles and `out_pose` 16 writable doubles.
 */
enum IkStatus ik_forward_kinematics(const struct IkChain *chain,
                                    const double *angles,
                                    size_t len,
                                    double *out_pose);

struct IkSolveOptions ik_solve_options_default(void);

/**
 * Solves for `pose` (16 doubles, row-major). `options` may be null for defaults.
 * The result handle is produced for every solver outcome, including infeasible.
 *
 * # Safety
 * Pointers must be valid as documented; `out` receives a handle to free with [`ik_result_free`].
 */
enum IkStatus ik_solve(const struct IkChain *chain,
                       const double *pose,
                       const struct IkSolveOptions *options,
                       struct IkSolveResult **out);

/**
 * # Safety
 * `result` must be null or a live handle from [`ik_solve`].
 */
void ik_result_free(struct IkSolveResult *result);

/**
 * # Safety
 * `result` must be a live handle and `out` writable.
 */
enum IkStatus ik_result_outcome(const struct IkSolveResult *result, enum IkOutcome *out);

/**
 * Copies the joint angles into `out` (capacity `cap`); `written` receives the count.
 * Returns `NoSolution` when the result carries no angles.
 *
 * # Safety
 * `out` must hold `cap` writable doubles; `written` may be null.
 */
enum IkStatus ik_result_angles(const struct IkSolveResult *result,
                               double *out,
                               size_t cap,
                               size_t *written);

/**
 * # Safety
 * `result` must be a live handle and `out` writable.
 */
enum IkStatus ik_result_objective(const struct IkSolveResult *result, double *out);

/**
 * # Safety
 * `result` must be a live handle and `out` writable.
 */
enum IkStatus ik_result_best_bound(const struct IkSolveResult *result, double *out);

/**
 * # Safety
 * `result` must be a live handle and `out` writable.
 */
enum IkStatus ik_result_gap(const struct IkSolveResult *result, double *out);

/**
 * Seconds spent in the global search.
 *
 * # Safety
 * `result` must be a live handle and `out` writable.
 */
enum IkStatus ik_result_wall_time(const struct IkSolveResult *result, double *out);

/**
 * # Safety
 * `result` must be a live handle and `out` writable.
 */
enum IkStatus ik_result_nodes(const struct IkSolveResult *result, uint64_t *out);

/**
 * Full result as JSON; release the string with [`ik_string_free`].
 *
 * # Safety
 * `result` must be a live handle and `out` writable.
 */
enum IkStatus ik_result_to_json(const struct IkSolveResult *result, char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void ik_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IK_FFI_H */
