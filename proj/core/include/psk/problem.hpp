#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "psk/errors.hpp"
#include "psk/taylor.hpp"

namespace psk {

/// One term a(x) * b(xi) * d^p/dx^p d^q/dxi^q K_kernel, scaled by weight.
/// Absent a/b mean the constant 1.
struct PdeTerm {
    int kernel = 0;
    std::optional<CoeffExpr> a_of_x;
    std::optional<CoeffExpr> b_of_xi;
    int dx = 0;
    int dxi = 0;
    double weight = 1.0;
};

/// Sum of terms equal to zero on the (sub)region.
struct PdeConstraint {
    std::vector<PdeTerm> terms;
    int max_derivative_order() const;
};

/// Line xi = alpha*x + gamma in the problem's current (tilde) coordinates.
struct BoundaryLine {
    double alpha = 0.0;
    double gamma = 0.0;
};

struct BoundaryTerm {
    int kernel = 0;
    std::optional<CoeffExpr> c_of_x; // univariate coefficient, absent = 1
    int trace_deriv = 0;             // 0 or 1
};

/// Right-hand side scale * integral_{lower}^{line} integrand(xi) dxi,
/// with `lower` in the problem's current xi coordinate.
struct IntegralRhs {
    CoeffExpr integrand;
    double lower = 0.0;
    double scale = 1.0;
};

struct BoundaryConstraint {
    BoundaryLine line;
    std::vector<BoundaryTerm> terms;
    std::variant<CoeffExpr, IntegralRhs> rhs;
    int max_trace_deriv() const;
};

/// Continuity/jump condition trace_B(kernel_b) - trace_A(kernel_a) = jump
/// along the split line xi = beta*x.
struct MatchingConstraint {
    int kernel_a = 0;
    int kernel_b = 0;
    std::optional<CoeffExpr> jump; // absent = 0
};

struct SplitSpec {
    double beta = 0.5;               // split line xi = beta*x, 0 < beta < 1
    std::vector<int> kernels;        // kernel indices represented per-region
    std::vector<BoundaryConstraint> region_a_bcs; // below the line
    std::vector<BoundaryConstraint> region_b_bcs; // above the line
    std::vector<MatchingConstraint> matching;
};

/// Declarative coupled-kernel Goursat problem on the triangle
/// 0 <= xi <= x <= L, expanded about (x0, xi0). Lines and integral lower
/// limits are stored in the tilde (shifted) coordinates; coefficient
/// expressions stay in the original variable and are expanded about the
/// center at assembly time.
struct KernelProblem {
    int n_kernels = 1;
    double domain_length = 1.0;
    double x0 = 0.0;
    double xi0 = 0.0;
    std::vector<PdeConstraint> pdes;
    std::vector<BoundaryConstraint> bcs;
    std::optional<SplitSpec> split;
    std::vector<int> default_orders; // empty, one global, or one per group

    bool is_split_kernel(int k) const;
};

/// Re-centers the expansion at (x0, xi0) relative to the problem's current
/// frame: boundary lines (alpha, gamma) become (alpha, alpha*x0 + gamma - xi0)
/// and integral lower limits shift by -xi0. Throws DomainError if a
/// coefficient expression is singular at the new absolute center.
KernelProblem localize(const KernelProblem& p, double x0, double xi0);

struct ValidationGroup {
    std::vector<int> kernels;
    int regions = 1;
    int probe_order = 0;
    std::int64_t unknowns = 0;
    std::int64_t pde_rows = 0;
    std::int64_t bc_rows = 0;
    std::int64_t match_rows = 0;
    std::int64_t duplicates_removed = 0;
    std::int64_t rows_after = 0;
};

struct ValidationReport {
    std::vector<std::string> errors;   // structural defects
    std::vector<std::string> warnings; // e.g. overdetermined counts
    std::vector<ValidationGroup> groups;
    bool ok() const { return errors.empty(); }
    std::string summary() const;
};

/// Counting and coverage checks; probe-assembles each kernel group at a
/// small order to count the actual duplicate rows. Report-only.
ValidationReport validate_problem(const KernelProblem& p, int probe_order = 6);

/// Kernel groups: connected components of the coupling graph induced by
/// PDE terms, boundary terms, and matching constraints. Deterministic
/// order (sorted by smallest kernel index).
std::vector<std::vector<int>> kernel_groups(const KernelProblem& p);

/// JSON document parsing/serialization (schema documented in the README).
/// parse(serialize(p)) is structurally identical to p.
KernelProblem parse_problem(const std::string& text);
std::string serialize_problem(const KernelProblem& p);

} // namespace psk
