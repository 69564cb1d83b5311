#ifndef POLYSHIFT_H
#define POLYSHIFT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PsStatus {
  PS_STATUS_OK = 0,
  PS_STATUS_NULL_POINTER = 1,
  PS_STATUS_INVALID_ARGUMENT = 2,
  PS_STATUS_DIMENSION_MISMATCH = 3,
  // A structural check failed: non-commuting shifts, singular filter,
  // unstable recursion, LP failure.
  PS_STATUS_NUMERICAL = 4,
  // The solver ran but its iterates blew up; the output is still written.
  PS_STATUS_DIVERGED = 5,
  PS_STATUS_IO = 6,
  PS_STATUS_PANIC = 7,
} PsStatus;

typedef enum PsShiftKind {
  // Symmetric normalized Laplacian.
  PS_SHIFT_KIND_LSYM = 0,
  PS_SHIFT_KIND_LAPLACIAN = 1,
  PS_SHIFT_KIND_ADJACENCY = 2,
  // One normalized Laplacian per circulant generator.
  PS_SHIFT_KIND_GENERATORS = 3,
} PsShiftKind;

typedef enum PsMethod {
  PS_METHOD_IOPA = 0,
  PS_METHOD_ICPA = 1,
  PS_METHOD_GD0 = 2,
  PS_METHOD_ARMA = 3,
} PsMethod;

typedef struct PsFamily PsFamily;

typedef struct PsFilter PsFilter;

typedef struct PsGraph PsGraph;

typedef struct PsCommStats {
  size_t rounds;
  size_t messages;
  size_t flops;
} PsCommStats;

typedef struct PsSolveOptions {
  size_t max_iter;
  // Relative residual at which to stop; 0 runs all `max_iter` iterations.
  double tol;
} PsSolveOptions;

typedef struct PsSolveInfo {
  size_t iterations;
  double residual;
  bool converged;
  bool diverged;
} PsSolveInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Description of the last failure on this thread, or "" after a success.
// The pointer stays valid until the next `ps_*` call on the same thread.
const char *ps_last_error_message(void);

const char *ps_version(void);

// Circulant graph C_n({g_1..g_k}).
//
// # Safety
// `generators` must point to `count` values; `out` must be writable.
enum PsStatus ps_graph_circulant(size_t n,
                                 const size_t *generators,
                                 size_t count,
                                 struct PsGraph **out);

// Undirected simple graph from `count` pairs laid out as i0 j0 i1 j1 ...
//
// # Safety
// `edges` must point to `2 * count` values; `out` must be writable.
enum PsStatus ps_graph_from_edges(size_t n,
                                  const size_t *edges,
                                  size_t count,
                                  struct PsGraph **out);

// # Safety
// `g` must come from a `ps_graph_*` constructor and not be used afterwards.
void ps_graph_free(struct PsGraph *g);

// # Safety
// `g` must be a live graph handle or null (returns 0).
size_t ps_graph_num_vertices(const struct PsGraph *g);

// # Safety
// `g` must be a live graph handle or null (returns 0).
size_t ps_graph_num_edges(const struct PsGraph *g);

// Shift family on `g`. `Generators` needs a circulant graph. The family
// keeps its own copy of the graph, so `g` may be freed afterwards.
//
// # Safety
// `g` must be a live graph handle; `out` must be writable.
enum PsStatus ps_family_new(const struct PsGraph *g, enum PsShiftKind kind, struct PsFamily **out);

// # Safety
// `f` must come from [`ps_family_new`] and not be used afterwards.
void ps_family_free(struct PsFamily *f);

// Number of vertices N.
//
// # Safety
// `f` must be a live family handle or null (returns 0).
size_t ps_family_dim(const struct PsFamily *f);

// Number of shifts d.
//
// # Safety
// `f` must be a live family handle or null (returns 0).
size_t ps_family_len(const struct PsFamily *f);

// Joint spectrum as N rows of d values, row-major; `len` must be N·d.
//
// # Safety
// `f` must be a live family handle; `out` must hold `len` doubles.
enum PsStatus ps_family_spectrum(const struct PsFamily *f, double *out, size_t len);

// h(t) = Σ c_k t^k over the multi-indices k ≤ `degrees`, coefficients in
// lexicographic order with the last index fastest.
//
// # Safety
// `degrees` must hold `d` values and `coeffs` `count` values.
enum PsStatus ps_filter_new(const size_t *degrees,
                            size_t d,
                            const double *coeffs,
                            size_t count,
                            struct PsFilter **out);

// Filter from the JSON accepted by the command line tool.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum PsStatus ps_filter_from_json(const char *json, struct PsFilter **out);

// # Safety
// `h` must come from a `ps_filter_*` constructor and not be used afterwards.
void ps_filter_free(struct PsFilter *h);

// y = h(S_1, .., S_d) x.
//
// # Safety
// Handles must be live; `x` and `y` must each hold `n` doubles.
enum PsStatus ps_filter_apply(const struct PsFilter *h,
                              const struct PsFamily *f,
                              const double *x,
                              double *y,
                              size_t n);

// Same result as [`ps_filter_apply`], computed by the vertex-level network
// simulator; `stats` may be null.
//
// # Safety
// Handles must be live; `x` and `y` must each hold `n` doubles.
enum PsStatus ps_filter_apply_distributed(const struct PsFilter *h,
                                          const struct PsFamily *f,
                                          const double *x,
                                          double *y,
                                          size_t n,
                                          struct PsCommStats *stats);

// Solves h(S) x = b. `degree` is L for IOPA and K for ICPA and is ignored
// otherwise. ICPA fits on the bounding box of the spectrum. Returns
// `Diverged` with `x` still written when the iterates blow up. `opts` and
// `info` may be null.
//
// # Safety
// Handles must be live; `b` and `x` must each hold `n` doubles.
enum PsStatus ps_inverse_solve(const struct PsFilter *h,
                               const struct PsFamily *f,
                               enum PsMethod method,
                               size_t degree,
                               const double *b,
                               double *x,
                               size_t n,
                               const struct PsSolveOptions *opts,
                               struct PsSolveInfo *info);

// a_L = min over degree-L polynomials g of max over the spectrum |1 − g h|.
//
// # Safety
// Handles must be live; `a` must be writable.
enum PsStatus ps_optimal_poly_error(const struct PsFilter *h,
                                    const struct PsFamily *f,
                                    size_t l,
                                    double *a);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POLYSHIFT_H */
