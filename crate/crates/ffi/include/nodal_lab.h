#ifndef NODAL_LAB_H
#define NODAL_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Status codes. Stable: new codes are only ever appended.
 */
typedef enum NlStatus {
  NL_OK = 0,
  NL_NULL_POINTER = 1,
  NL_INVALID_ARGUMENT = 2,
  NL_PARSE = 3,
  NL_IO = 4,
  NL_EMPTY_EIGENSPACE = 5,
  NL_UNDER_RESOLVED = 6,
  NL_ZERO_FIELD = 7,
  NL_UNKNOWN_DOMAIN = 8,
  NL_COMPUTATION = 9,
  NL_PANIC = 10,
} NlStatus;

typedef enum NlManifoldKind {
  NL_TORUS = 0,
  NL_DIRICHLET_BOX = 1,
} NlManifoldKind;

/**
 * Nodal decomposition of a field (opaque).
 */
typedef struct NlDecomposition NlDecomposition;

/**
 * Field sampled on a cell-centred grid (opaque).
 */
typedef struct NlField NlField;

/**
 * Eigenfunction specification (opaque).
 */
typedef struct NlSpec NlSpec;

/**
 * One nodal domain. `sign` is +1 or −1.
 */
typedef struct NlDomainInfo {
  uint32_t label;
  int32_t sign;
  size_t cell_count;
  double volume;
  double l2_mass;
  /**
   * `INFINITY` when the domain fills the grid.
   */
  double inradius;
  double max_value;
} NlDomainInfo;

/**
 * Good/bad cube covering summary.
 */
typedef struct NlCoveringSummary {
  size_t cube_count;
  uint64_t kappa_delta;
  double good_mass;
  /**
   * `good_mass − (1 − κ_δ/γ)`; never below −1e−9.
   */
  double mass_bound_margin;
  /**
   * Label of the domain with at least 3/4 of its mass on good cubes, or 0.
   */
  uint32_t star_domain;
} NlCoveringSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *nl_last_error(void);

/**
 * Library version, static storage.
 */
const char *nl_version(void);

/**
 * Seeded random eigenfunction at `target` (±`window`).
 *
 * # Safety
 * `sides` must point to `dims` doubles; `out` must be writable.
 */
enum NlStatus nl_spec_random(enum NlManifoldKind kind,
                             const double *sides,
                             size_t dims,
                             double target,
                             double window,
                             uint64_t seed,
                             struct NlSpec **out);

/**
 * Parse a spec from its JSON document.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum NlStatus nl_spec_from_json(const char *json, struct NlSpec **out);

/**
 * JSON document of a spec. Release with [`nl_string_free`].
 *
 * # Safety
 * `spec` must be a live handle; `out` must be writable.
 */
enum NlStatus nl_spec_to_json(const struct NlSpec *spec, char **out);

/**
 * # Safety
 * `spec` must be a live handle; `out` must be writable.
 */
enum NlStatus nl_spec_lambda(const struct NlSpec *spec, double *out);

/**
 * Value at a point given in manifold coordinates.
 *
 * # Safety
 * `point` must point to `dims` doubles; `out` must be writable.
 */
enum NlStatus nl_spec_evaluate(const struct NlSpec *spec,
                               const double *point,
                               size_t dims,
                               double *out);

/**
 * # Safety
 * `spec` must be NULL or a handle not yet freed.
 */
void nl_spec_free(struct NlSpec *spec);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, not yet freed.
 */
void nl_string_free(char *s);

/**
 * Cells per axis that resolve `spec` at `cells_per_wavelength`.
 *
 * # Safety
 * `spec` must be a live handle; `out` must be writable.
 */
enum NlStatus nl_resolution_for(const struct NlSpec *spec,
                                double cells_per_wavelength,
                                size_t *out);

/**
 * Sample on `resolution` cells per axis, normalised to unit L².
 *
 * # Safety
 * `spec` must be a live handle; `out` must be writable.
 */
enum NlStatus nl_field_sample(const struct NlSpec *spec, size_t resolution, struct NlField **out);

/**
 * Number of cells; the values are laid out with the last axis fastest.
 *
 * # Safety
 * `field` must be a live handle; `out` must be writable.
 */
enum NlStatus nl_field_len(const struct NlField *field, size_t *out);

/**
 * Copy up to `len` values into `buf`.
 *
 * # Safety
 * `buf` must have room for `len` doubles.
 */
enum NlStatus nl_field_values(const struct NlField *field, double *buf, size_t len);

/**
 * # Safety
 * `field` must be NULL or a handle not yet freed.
 */
void nl_field_free(struct NlField *field);

/**
 * # Safety
 * `field` must be a live handle; `out` must be writable.
 */
enum NlStatus nl_decompose(const struct NlField *field, struct NlDecomposition **out);

/**
 * # Safety
 * `d` must be a live handle; `out` must be writable.
 */
enum NlStatus nl_decomposition_domain_count(const struct NlDecomposition *d, size_t *out);

/**
 * Domain `index` (0-based; domains are ordered by size, label = index + 1).
 *
 * # Safety
 * `d` must be a live handle; `out` must be writable.
 */
enum NlStatus nl_decomposition_domain(const struct NlDecomposition *d,
                                      size_t index,
                                      struct NlDomainInfo *out);

/**
 * Copy the per-cell labels (0 on zero cells) into `buf`.
 *
 * # Safety
 * `buf` must have room for `len` labels.
 */
enum NlStatus nl_decomposition_labels(const struct NlDecomposition *d, uint32_t *buf, size_t len);

/**
 * # Safety
 * `d` must be NULL or a handle not yet freed.
 */
void nl_decomposition_free(struct NlDecomposition *d);

/**
 * Cover the field with cubes of side `h`, classify them at `gamma` and
 * `delta`, and look for a star domain.
 *
 * # Safety
 * `field` and `d` must be live handles from the same field; `out` must be
 * writable.
 */
enum NlStatus nl_covering_summary(const struct NlField *field,
                                  const struct NlDecomposition *d,
                                  double h,
                                  double gamma,
                                  double delta,
                                  struct NlCoveringSummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NODAL_LAB_H */
