#ifndef RIGIDPLAST_H
#define RIGIDPLAST_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  RP_STATUS_OK = 0,
  RP_STATUS_NULL_POINTER = 1,
  RP_STATUS_INVALID_ARGUMENT = 2,
  RP_STATUS_SOLVER_FAILURE = 3,
  RP_STATUS_OUT_OF_RANGE = 4,
  RP_STATUS_PANIC = 5,
} RpStatus;

typedef enum {
  RP_BENCHMARK_SHEAR = 0,
  RP_BENCHMARK_TRACTION = 1,
  RP_BENCHMARK_RIGID41 = 2,
} RpBenchmark;

typedef struct RpEvolution RpEvolution;

typedef struct RpMesh RpMesh;

typedef struct RpSweep RpSweep;

typedef struct {
  double shear_modulus;
  double bulk_modulus;
  double yield_radius;
} RpMaterial;

typedef struct {
  size_t step;
  double time;
  double q;
  double d;
  double w;
  double gap;
  double max_sigma_dev;
  double plastic_cell_fraction;
} RpLedgerRow;

typedef struct {
  double epsilon;
  double sup_e_l2;
  double int_sigma_l2_sq;
  double sup_sigma_dev_linf;
  double sup_div_u_l2;
  double hydrostatic;
  double flow_gap;
  double total_dissipation;
} RpSweepMetrics;

typedef struct {
  double stress_gap;
  double max_strain_rate;
  double max_div_v;
  double max_sigma_dev[2];
  bool witness;
} RpWitness;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *rp_version(void);

/**
 * Copies the last error message of this thread into `buf` (truncated,
 * always NUL-terminated when `len > 0`). Returns the full message length.
 */
size_t rp_last_error(char *buf, size_t len);

/**
 * Unit-square mesh with `n` cells per side. `dirichlet_mask` bits: 1 bottom,
 * 2 right, 4 top, 8 left.
 */
RpStatus rp_mesh_new(size_t n, uint32_t dirichlet_mask, RpMesh **mesh);

size_t rp_mesh_num_nodes(const RpMesh *mesh);

size_t rp_mesh_num_elements(const RpMesh *mesh);

void rp_mesh_free(RpMesh *mesh);

/**
 * Cellwise return map. Tensors are `dim (dim + 1) / 2` upper-triangle
 * coefficients (`xx, xy, yy` in 2-D; `xx, xy, xz, yy, yz, zz` in 3-D).
 */
RpStatus rp_radial_return(size_t dim,
                          const double *e_dev,
                          const double *p_old,
                          RpMaterial material,
                          double epsilon,
                          double *p_new,
                          double *sigma_dev);

/**
 * Runs a benchmark evolution on a uniform grid of `steps` steps over
 * `[0, 1]`. `benchmark` takes an `RpBenchmark` value.
 */
RpStatus rp_evolution_run(uint32_t benchmark,
                          size_t n,
                          size_t steps,
                          double epsilon,
                          RpMaterial material,
                          RpEvolution **evolution);

/**
 * Number of ledger rows (grid times including the initial one).
 */
size_t rp_evolution_num_rows(const RpEvolution *evolution);

RpStatus rp_evolution_row(const RpEvolution *evolution, size_t index, RpLedgerRow *row);

void rp_evolution_free(RpEvolution *evolution);

/**
 * ε-sweep of a benchmark; `epsilons` must be strictly decreasing. Uses the
 * cubic time grading of the command-line sweep.
 */
RpStatus rp_sweep_run(uint32_t benchmark,
                      size_t n,
                      size_t steps,
                      const double *epsilons,
                      size_t num_epsilons,
                      RpMaterial material,
                      size_t threads,
                      RpSweep **sweep);

size_t rp_sweep_len(const RpSweep *sweep);

RpStatus rp_sweep_metrics(const RpSweep *sweep, size_t index, RpSweepMetrics *metrics);

void rp_sweep_free(RpSweep *sweep);

/**
 * Non-uniqueness witness for constant `f`, `g` and rigid velocity
 * `(-ω x₂ + b₁, ω x₁ + b₂)` on a fully clamped `n × n` mesh.
 */
RpStatus rp_example41_verify(double c,
                             double f,
                             double g,
                             double rotation,
                             const double *translation,
                             const double *lambdas,
                             size_t n,
                             double yield_radius,
                             RpWitness *witness);

/**
 * Certified safe-load margin of a benchmark's loads at the end of the
 * horizon. For TRACTION the peak load is `load_fraction` times the
 * constant-stress limit.
 */
RpStatus rp_safe_margin(uint32_t benchmark,
                        size_t n,
                        double load_fraction,
                        RpMaterial material,
                        size_t max_iters,
                        double *margin);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RIGIDPLAST_H */
