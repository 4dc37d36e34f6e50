#include "psk/linsys.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <ostream>
#include <unordered_map>

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <Eigen/SparseQR>

namespace psk {

SparseSystem::SparseSystem(std::int64_t n_unknowns) : n_unknowns_(n_unknowns) {
    if (n_unknowns <= 0)
        throw DimensionMismatch("system needs at least one unknown");
}

std::int32_t SparseSystem::intern_tag(const std::string& tag) {
    for (size_t i = 0; i < tags_.size(); ++i)
        if (tags_[i] == tag)
            return static_cast<std::int32_t>(i);
    tags_.push_back(tag);
    return static_cast<std::int32_t>(tags_.size() - 1);
}

void SparseSystem::append_row(std::vector<std::pair<std::int64_t, double>> entries, double rhs,
                              std::int32_t tag) {
    if (rhs == 0.0)
        rhs = 0.0; // canonicalize -0.0 so duplicate hashing is sign-of-zero blind
    std::sort(entries.begin(), entries.end());
    std::vector<std::pair<std::int64_t, double>> pruned;
    pruned.reserve(entries.size());
    for (auto& [c, v] : entries) {
        if (c < 0 || c >= n_unknowns_)
            throw DimensionMismatch("row entry addresses an unknown out of range");
        if (!pruned.empty() && pruned.back().first == c)
            throw DimensionMismatch("duplicate column in row");
        if (v != 0.0)
            pruned.push_back({c, v});
    }
    rows_.push_back(SystemRow{std::move(pruned), rhs, tag});
}

void SparseSystem::append_block(std::span<const SystemRow> block, const std::string& tag) {
    std::int32_t t = intern_tag(tag);
    for (const SystemRow& r : block)
        append_row(r.entries, r.rhs, t);
}

namespace {

std::uint64_t row_hash(const SystemRow& r) {
    // FNV-1a over the raw bytes of (col, value) pairs and the rhs.
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const void* p, size_t n) {
        const unsigned char* b = static_cast<const unsigned char*>(p);
        for (size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ULL;
        }
    };
    for (const auto& [c, v] : r.entries) {
        mix(&c, sizeof(c));
        mix(&v, sizeof(v));
    }
    mix(&r.rhs, sizeof(r.rhs));
    return h;
}

bool rows_equal(const SystemRow& a, const SystemRow& b) {
    return a.rhs == b.rhs && a.entries == b.entries;
}

} // namespace

void SparseSystem::dedup_rows() {
    std::unordered_map<std::uint64_t, std::vector<size_t>> seen;
    std::vector<SystemRow> kept;
    kept.reserve(rows_.size());
    for (SystemRow& row : rows_) {
        std::uint64_t h = row_hash(row);
        bool dup = false;
        for (size_t k : seen[h]) {
            if (rows_equal(kept[k], row)) {
                dup = true;
                ++rows_removed_;
                const std::string& mine = row.tag >= 0 ? tags_[static_cast<size_t>(row.tag)] : "?";
                const std::string& other =
                    kept[k].tag >= 0 ? tags_[static_cast<size_t>(kept[k].tag)] : "?";
                removal_log_.push_back("duplicate row from " + mine + " already present from " +
                                       other);
                break;
            }
        }
        if (!dup) {
            seen[h].push_back(kept.size());
            kept.push_back(std::move(row));
        }
    }
    rows_ = std::move(kept);
}

std::int64_t SparseSystem::nnz() const {
    std::int64_t n = 0;
    for (const SystemRow& r : rows_)
        n += static_cast<std::int64_t>(r.entries.size());
    return n;
}

double SparseSystem::sparsity() const {
    if (rows_.empty())
        return 1.0;
    double total = static_cast<double>(n_rows()) * static_cast<double>(n_unknowns_);
    return 1.0 - static_cast<double>(nnz()) / total;
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;

SpMat to_eigen(const SparseSystem& sys) {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<size_t>(sys.nnz()));
    const auto& rows = sys.rows();
    for (size_t r = 0; r < rows.size(); ++r)
        for (const auto& [c, v] : rows[r].entries)
            trips.emplace_back(static_cast<int>(r), static_cast<int>(c), v);
    SpMat A(static_cast<int>(sys.n_rows()), static_cast<int>(sys.n_unknowns()));
    A.setFromTriplets(trips.begin(), trips.end());
    A.makeCompressed();
    return A;
}

Eigen::VectorXd rhs_vector(const SparseSystem& sys) {
    Eigen::VectorXd b(sys.n_rows());
    const auto& rows = sys.rows();
    for (size_t r = 0; r < rows.size(); ++r)
        b[static_cast<Eigen::Index>(r)] = rows[r].rhs;
    return b;
}

double relative_residual(const SpMat& A, const Eigen::VectorXd& x, const Eigen::VectorXd& b) {
    double bn = b.norm();
    return (A * x - b).norm() / std::max(bn, 1.0);
}

} // namespace

SolveResult SparseSystem::solve(double tol) const {
    const SpMat A = to_eigen(*this);
    const Eigen::VectorXd b = rhs_vector(*this);
    SolveResult res;

    if (n_rows() == n_unknowns_) {
        Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
        lu.analyzePattern(A);
        lu.factorize(A);
        if (lu.info() == Eigen::Success) {
            Eigen::VectorXd x = lu.solve(b);
            // A couple of refinement sweeps; ill-conditioned but solvable
            // systems (oscillatory kernels) profit, everything else is a
            // no-op. Keep the best iterate.
            double best = relative_residual(A, x, b);
            for (int it = 0; it < 2 && best > 0.0; ++it) {
                Eigen::VectorXd r = b - A * x;
                Eigen::VectorXd xc = x + lu.solve(r);
                double rc = relative_residual(A, xc, b);
                if (rc >= best)
                    break;
                x = xc;
                best = rc;
            }
            res.coeffs.assign(x.data(), x.data() + x.size());
            res.residual_norm = best;
            return res;
        }
        // Factorization failed; fall through to QR least squares.
    }

    if (n_rows() >= n_unknowns_) {
        Eigen::SparseQR<SpMat, Eigen::COLAMDOrdering<int>> qr;
        qr.compute(A);
        if (qr.info() != Eigen::Success)
            throw SingularSystem("sparse QR factorization failed");
        Eigen::VectorXd x = qr.solve(b);
        double best = relative_residual(A, x, b);
        for (int it = 0; it < 2 && best > 0.0; ++it) {
            Eigen::VectorXd r = b - A * x;
            Eigen::VectorXd xc = x + qr.solve(r);
            double rc = relative_residual(A, xc, b);
            if (rc >= best)
                break;
            x = xc;
            best = rc;
        }
        res.coeffs.assign(x.data(), x.data() + x.size());
        res.residual_norm = best;
        res.rank_deficient = qr.rank() < n_unknowns_;
        res.least_squares = true;
        if (n_rows() == n_unknowns_ && res.residual_norm > tol)
            throw SingularSystem("square system is singular: least-squares residual " +
                                 std::to_string(res.residual_norm) + " exceeds tolerance");
        return res;
    }

    // Underdetermined: minimum-norm solution via a dense complete
    // orthogonal decomposition. Only reachable for user-authored problems.
    if (static_cast<double>(n_rows()) * static_cast<double>(n_unknowns_) > 4e7)
        throw SingularSystem("underdetermined system too large for the dense min-norm path");
    Eigen::MatrixXd Ad(A);
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(Ad);
    Eigen::VectorXd x = cod.solve(b);
    res.coeffs.assign(x.data(), x.data() + x.size());
    res.residual_norm = relative_residual(A, x, b);
    res.rank_deficient = cod.rank() < n_unknowns_;
    res.least_squares = true;
    return res;
}

void SparseSystem::write_matrix_market(std::ostream& matrix_os, std::ostream& rhs_os) const {
    matrix_os << "%%MatrixMarket matrix coordinate real general\n";
    matrix_os << n_rows() << ' ' << n_unknowns_ << ' ' << nnz() << '\n';
    for (size_t r = 0; r < rows_.size(); ++r)
        for (const auto& [c, v] : rows_[r].entries)
            matrix_os << (r + 1) << ' ' << (c + 1) << ' ' << v << '\n';
    rhs_os << "%%MatrixMarket matrix array real general\n";
    rhs_os << n_rows() << " 1\n";
    for (const SystemRow& r : rows_)
        rhs_os << r.rhs << '\n';
}

} // namespace psk
