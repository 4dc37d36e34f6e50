#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "psk/errors.hpp"

namespace psk {

/// One assembled constraint row: sorted sparse coefficients, right-hand
/// side, and the provenance tag of the block it came from.
struct SystemRow {
    std::vector<std::pair<std::int64_t, double>> entries; // (column, value), sorted
    double rhs = 0.0;
    std::int32_t tag = -1;
};

struct SolveResult {
    std::vector<double> coeffs;
    double residual_norm = 0.0; // ||A x - b|| / max(||b||, 1)
    bool rank_deficient = false;
    bool least_squares = false;
};

/// Sparse constraint container in assembly (row) orientation. In the
/// row-vector convention kappa * M = b of the operator matrices, these
/// rows are the columns of M, so the solve is the conventional A x = b.
class SparseSystem {
public:
    explicit SparseSystem(std::int64_t n_unknowns);

    std::int64_t n_unknowns() const { return n_unknowns_; }
    std::int64_t n_rows() const { return static_cast<std::int64_t>(rows_.size()); }
    const std::vector<SystemRow>& rows() const { return rows_; }
    const std::vector<std::string>& tags() const { return tags_; }
    std::int64_t rows_removed() const { return rows_removed_; }
    const std::vector<std::string>& removal_log() const { return removal_log_; }

    std::int32_t intern_tag(const std::string& tag);

    /// Appends one block of rows sharing a provenance tag. Exact zero
    /// coefficients are pruned; entries must address valid columns.
    void append_block(std::span<const SystemRow> block, const std::string& tag);

    /// Convenience: append rows given as (row-major) triplet columns.
    void append_row(std::vector<std::pair<std::int64_t, double>> entries, double rhs,
                    std::int32_t tag);

    /// Removes rows that are exact duplicates (pattern, values and rhs) of
    /// an earlier row; removals are logged with both tags.
    void dedup_rows();

    /// Fraction of exactly-zero entries of the assembled matrix.
    double sparsity() const;

    std::int64_t nnz() const;

    /// Direct sparse solve: square systems use LU (least-squares fallback
    /// on failure), overdetermined ones sparse QR, underdetermined ones a
    /// dense minimum-norm decomposition. Throws SingularSystem when a
    /// square system cannot be solved to `tol`.
    SolveResult solve(double tol = 1e-10) const;

    /// Matrix Market coordinate dump of A plus a dense array file for b.
    void write_matrix_market(std::ostream& matrix_os, std::ostream& rhs_os) const;

private:
    std::int64_t n_unknowns_;
    std::vector<SystemRow> rows_;
    std::vector<std::string> tags_;
    std::int64_t rows_removed_ = 0;
    std::vector<std::string> removal_log_;
};

} // namespace psk
