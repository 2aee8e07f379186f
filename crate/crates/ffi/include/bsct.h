#ifndef BSCT_H
#define BSCT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result code of every fallible call.
 */
typedef enum BsctStatus {
  BSCT_STATUS_OK = 0,
  BSCT_STATUS_NULL_POINTER = 1,
  BSCT_STATUS_INVALID_ARGUMENT = 2,
  BSCT_STATUS_PARSE = 3,
  BSCT_STATUS_IO = 4,
  BSCT_STATUS_POTENTIAL = 5,
  BSCT_STATUS_DYNAMICS = 6,
  /*
   The output buffer is too small; nothing was written.
   */
  BSCT_STATUS_BUFFER_TOO_SMALL = 7,
  BSCT_STATUS_PANIC = 8,
} BsctStatus;

/*
 Either the analytic reference potential or a trained model.
 */
typedef struct BsctModel BsctModel;

/*
 A molecular structure: species, positions and bonds.
 */
typedef struct BsctStructure BsctStructure;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static nul-terminated string.
 */
const char *bsct_version(void);

/*
 Message of the last failed call on this thread; empty after a success.
 The pointer stays valid until the next call on the same thread.
 */
const char *bsct_last_error(void);

/*
 Parses one XYZ frame.

 # Safety
 `text` must be a nul-terminated string and `out` a valid pointer.
 */
enum BsctStatus bsct_structure_from_xyz(const char *text, struct BsctStructure **out);

/*
 Reads an XYZ file.

 # Safety
 `path` must be a nul-terminated string and `out` a valid pointer.
 */
enum BsctStatus bsct_structure_load(const char *path, struct BsctStructure **out);

/*
 Releases a structure; null is ignored.

 # Safety
 `s` must come from this library and not be used afterwards.
 */
void bsct_structure_free(struct BsctStructure *s);

/*
 Number of atoms, or 0 for null.

 # Safety
 `s` must be null or a live structure.
 */
uintptr_t bsct_structure_atom_count(const struct BsctStructure *s);

/*
 Copies the positions (Å, `3 * n_atoms` values, x y z per atom) into `out`.

 # Safety
 `out` must point to `capacity` writable doubles.
 */
enum BsctStatus bsct_structure_positions(const struct BsctStructure *s,
                                         double *out,
                                         uintptr_t capacity);

/*
 The analytic reference potential.

 # Safety
 `out` must be a valid pointer.
 */
enum BsctStatus bsct_model_reference(struct BsctModel **out);

/*
 Loads a trained model checkpoint.

 # Safety
 `path` must be a nul-terminated string and `out` a valid pointer.
 */
enum BsctStatus bsct_model_load(const char *path, struct BsctModel **out);

/*
 Releases a model; null is ignored.

 # Safety
 `m` must come from this library and not be used afterwards.
 */
void bsct_model_free(struct BsctModel *m);

/*
 Energy (eV) and forces (eV/Å, `3 * n_atoms` values) of `structure`.
 `positions` may be null to use the structure's own coordinates; otherwise
 it holds `3 * n_atoms` values. The reference potential keeps the bonds of
 `structure`.

 # Safety
 Pointers must be valid for the sizes above.
 */
enum BsctStatus bsct_energy_forces(const struct BsctModel *model,
                                   const struct BsctStructure *structure,
                                   const double *positions,
                                   double *energy,
                                   double *forces);

/*
 Velocity-Verlet run from `structure` with Maxwell-Boltzmann velocities at
 `temperature` (K). Writes the energy drift (meV/atom) and the largest
 kinetic-temperature increase within `jump_window` fs (K). A blow-up is
 reported as [`BsctStatus::Dynamics`].

 # Safety
 Pointers must be valid.
 */
enum BsctStatus bsct_run_nve(const struct BsctModel *model,
                             const struct BsctStructure *structure,
                             uintptr_t steps,
                             double dt,
                             double temperature,
                             uint64_t seed,
                             double *energy_drift,
                             double *max_temp_jump);

/*
 Largest increase `T(t2) - T(t1)` with `t1 <= t2 <= t1 + window` over a
 series of `n` samples with increasing times.

 # Safety
 `times` and `temps` must hold `n` values.
 */
enum BsctStatus bsct_max_temp_jump(const double *times,
                                   const double *temps,
                                   uintptr_t n,
                                   double window,
                                   double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BSCT_H */
