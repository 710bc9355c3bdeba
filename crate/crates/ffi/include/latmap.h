#ifndef LATMAP_H
#define LATMAP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LatmapBackend {
  LATMAP_BACKEND_LGT4D = 0,
  LATMAP_BACKEND_LGT3D_BOUNDARY = 1,
  LATMAP_BACKEND_LGT3D = 2,
} LatmapBackend;

typedef enum LatmapMode {
  LATMAP_MODE_DIRECT = 0,
  LATMAP_MODE_SUPERCLIQUE = 1,
} LatmapMode;

typedef enum LatmapStatus {
  LATMAP_STATUS_OK = 0,
  LATMAP_STATUS_NULL_POINTER = 1,
  LATMAP_STATUS_INVALID_ARGUMENT = 2,
  LATMAP_STATUS_INVALID_MODEL = 3,
  LATMAP_STATUS_UNSUPPORTED = 4,
  LATMAP_STATUS_TOO_LARGE = 5,
  LATMAP_STATUS_VERIFICATION_FAILED = 6,
  LATMAP_STATUS_JSON = 7,
  LATMAP_STATUS_PANIC = 8,
  LATMAP_STATUS_OTHER = 9,
} LatmapStatus;

// Opaque compiled lattice instance.
typedef struct LatmapInstance LatmapInstance;

// Opaque spin model.
typedef struct LatmapModel LatmapModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the most recent failure on this thread, or null.
//
// The pointer stays valid until the next failing call on the same thread.
const char *latmap_last_error(void);

// Releases a string returned by this library.
//
// # Safety
// `s` must be null or a pointer obtained from this library that has not been
// freed.
void latmap_string_free(char *s);

// A model of `num_spins` binary spins and no terms.
//
// # Safety
// `out_model` must be a valid pointer to writable storage for a handle.
enum LatmapStatus latmap_model_new_binary(size_t num_spins, struct LatmapModel **out_model);

// Parses a model from its JSON form.
//
// # Safety
// `json` must be a nul-terminated string and `out_model` a valid pointer.
enum LatmapStatus latmap_model_from_json(const char *json, struct LatmapModel **out_model);

// Appends the term `-j * (-1)^(sum of support spins)`.
//
// # Safety
// `model` must be a live handle and `support` must point to `len` values.
enum LatmapStatus latmap_model_add_parity(struct LatmapModel *model,
                                          const size_t *support,
                                          size_t len,
                                          double j);

// Number of spins, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t latmap_model_num_spins(const struct LatmapModel *model);

// JSON form of a model; release it with `latmap_string_free`.
//
// # Safety
// `model` must be a live handle and `out_json` a valid pointer.
enum LatmapStatus latmap_model_to_json(const struct LatmapModel *model, char **out_json);

// `ln Z(beta)` by exact enumeration.
//
// # Safety
// `model` must be a live handle and `out_log_z` a valid pointer.
enum LatmapStatus latmap_log_z(const struct LatmapModel *model, double beta, double *out_log_z);

// Releases a model.
//
// # Safety
// `model` must be null or a handle from this library that has not been freed.
void latmap_model_free(struct LatmapModel *model);

// Compiles a target model onto a lattice.
//
// # Safety
// `target` must be a live handle, `out_instance` a valid pointer, and
// `backend` and `mode` declared enumerators.
enum LatmapStatus latmap_compile(const struct LatmapModel *target,
                                 enum LatmapBackend backend,
                                 enum LatmapMode mode,
                                 struct LatmapInstance **out_instance);

// Compiles an `n` by `m` Ising grid with uniform bond `j` and field `h`,
// and also returns its target model when `out_target` is not null.
//
// # Safety
// `out_instance` must be a valid pointer; `out_target` may be null.
enum LatmapStatus latmap_compile_ising2d(size_t n,
                                         size_t m,
                                         double j,
                                         double h,
                                         struct LatmapInstance **out_instance,
                                         struct LatmapModel **out_target);

// Lattice extents of an instance.
//
// # Safety
// `instance` must be a live handle and `out_dims` must point to 4 writable values.
enum LatmapStatus latmap_instance_dims(const struct LatmapInstance *instance, size_t *out_dims);

// Declared relation `Z_instance = 2^pow2 e^(-beta offset) Z_target`.
//
// # Safety
// `instance` must be a live handle; the output pointers must be valid.
enum LatmapStatus latmap_instance_accounting(const struct LatmapInstance *instance,
                                             int64_t *out_pow2,
                                             double *out_offset);

// The full lattice model of an instance.
//
// # Safety
// `instance` must be a live handle and `out_model` a valid pointer.
enum LatmapStatus latmap_instance_model(const struct LatmapInstance *instance,
                                        struct LatmapModel **out_model);

// JSON form of an instance; release it with `latmap_string_free`.
//
// # Safety
// `instance` must be a live handle and `out_json` a valid pointer.
enum LatmapStatus latmap_instance_to_json(const struct LatmapInstance *instance, char **out_json);

// Parses an instance from its JSON form.
//
// # Safety
// `json` must be a nul-terminated string and `out_instance` a valid pointer.
enum LatmapStatus latmap_instance_from_json(const char *json, struct LatmapInstance **out_instance);

// Releases an instance.
//
// # Safety
// `instance` must be null or a handle from this library that has not been freed.
void latmap_instance_free(struct LatmapInstance *instance);

// Checks an instance against a target at the given inverse temperatures.
// Returns `VerificationFailed` when the check fails; `out_max_residual`
// receives the largest residual either way, if not null.
//
// # Safety
// Handles must be live and `betas` must point to `num_betas` values.
enum LatmapStatus latmap_verify(const struct LatmapModel *target,
                                const struct LatmapInstance *instance,
                                const double *betas,
                                size_t num_betas,
                                double tol,
                                double *out_max_residual);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LATMAP_H */
