#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "psk/linsys.hpp"
#include "psk/problem.hpp"
#include "psk/triseries.hpp"

namespace psk {

struct AssemblyCounts {
    int regions = 1;
    std::int64_t unknowns = 0;
    std::int64_t pde_rows = 0;
    std::int64_t bc_rows = 0;
    std::int64_t match_rows = 0;
    std::int64_t duplicates_removed = 0;
    std::int64_t rows_after = 0;
};

/// Assembles one kernel group (all constraints whose kernels lie in
/// `kernels`) at order N: PDE blocks truncated to l(N - d) per constraint,
/// boundary blocks to degree N - max(trace_deriv), matching blocks to
/// degree N, then exact-duplicate rows removed.
SparseSystem assemble_group(const KernelProblem& p, const std::vector<int>& kernels, int N,
                            AssemblyCounts* counts = nullptr);

/// Whole-problem assembly at a single order (all groups block-diagonal).
SparseSystem assemble(const KernelProblem& p, int N);

AssemblyCounts assemble_counts(const KernelProblem& p, const std::vector<int>& kernels, int N);

struct KernelSolution {
    int kernel = 0;
    int region = 0; // 0 = single region or region A (below the split line)
    TriSeries series;
};

struct GroupReport {
    std::vector<int> kernels;
    int regions = 1;
    int order = 0;
    std::int64_t rows = 0;
    std::int64_t unknowns = 0;
    std::int64_t nnz = 0;
    std::int64_t rows_removed = 0;
    double sparsity = 1.0;
    double residual_linear = 0.0;
    bool rank_deficient = false;
    bool least_squares = false;
};

struct ConstraintResidual {
    std::string tag;
    double banded = 0.0; // residual of the enforced coefficient band
    double full = 0.0;   // pointwise residual against the exact data
};

struct SolveReport {
    std::vector<KernelSolution> kernels; // sorted by (kernel, region)
    std::vector<GroupReport> groups;
    std::vector<int> orders;             // one per group
    double residual_linear = 0.0;        // max over groups
    double sparsity = 1.0;               // element-weighted over groups
    bool rank_deficient = false;
    std::int64_t rows_removed = 0;
    double wall_time = 0.0; // seconds, assembly + solve
    std::vector<ConstraintResidual> residual_grid;

    const TriSeries& series_for(int kernel, int region = 0) const;

    /// Physical kernel value: split kernels select region A for
    /// xi <= beta*x and region B above the split line.
    double eval_kernel(const KernelProblem& p, int kernel, double x, double xi) const;
};

/// Resolves per-group truncation orders: `orders` may be empty (use the
/// problem's default), a single global order, or one order per group.
std::vector<int> resolve_orders(const KernelProblem& p, const std::vector<int>& orders);

/// Assembles and solves every kernel group, splits the solution into
/// per-(kernel, region) series, and fills grid residuals (grid_n = 0
/// skips them).
SolveReport solve_problem(const KernelProblem& p, const std::vector<int>& orders = {},
                          double tol = 1e-10, int grid_n = 201);

/// Max-absolute residuals of every constraint on an evaluation grid:
/// `banded` evaluates the enforced coefficient band, `full` compares
/// against exact coefficient functions and quadrature of the data.
std::vector<ConstraintResidual> residual_grid(const SolveReport& report, const KernelProblem& p,
                                              int grid_n);

/// Degree-by-degree back-substitution for the reaction-diffusion example
/// about the origin: lam is the series of (lambda(xi)+c)/epsilon, order
/// >= N-1. Fully independent of the matrix assembly path.
std::vector<double> recursion_oracle_ex1(const UniSeries& lam, int N);

struct DivergenceDiagnostic {
    double growth_rate = 0.0;
    bool flag = false;
};

/// Root-test heuristic on the top half of the coefficient degrees;
/// advisory only, never blocks a solve. Needs order >= 10.
DivergenceDiagnostic divergence_diagnostic(const TriSeries& s, double L);

// --- deterministic output writers (shared by the CLI and sweep) ------------

std::string format_double(double v); // shortest round-trip decimal

void write_coeffs_csv(std::ostream& os, const SolveReport& report, const KernelProblem& p);
void write_gain_csv(std::ostream& os, const SolveReport& report, const KernelProblem& p,
                    int grid_points);
/// Report JSON; pass include_wall_time = false for byte-stable output.
std::string report_to_json(const SolveReport& report, const KernelProblem& p,
                           bool include_wall_time = true);

// --- parameter sweeps -------------------------------------------------------

struct SweepParameter {
    std::string name;
    double min = 0.0;
    double max = 0.0;
    int count = 1; // grid points along this parameter (grid mode)
};

struct SweepSpec {
    std::string problem_template; // problem JSON; "${name}" strings are slots
    std::vector<SweepParameter> parameters;
    bool random = false;
    int samples = 0; // total draws in random mode
    std::uint64_t seed = 0;
    std::vector<int> orders;
    double tol = 1e-10;
};

SweepSpec parse_sweep(const std::string& text);

struct SweepOutcome {
    int n_ok = 0;
    int n_failed = 0;
};

/// Runs every sample in deterministic index order, writing
/// dataset.jsonl plus one coefficient CSV per successful sample into
/// out_dir. Failed samples are recorded in the dataset, not dropped.
SweepOutcome run_sweep(const SweepSpec& spec, const std::string& out_dir);

} // namespace psk
