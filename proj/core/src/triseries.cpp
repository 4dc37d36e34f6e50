#include "psk/triseries.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

namespace psk {

TriSeries::TriSeries(int order, double x0, double xi0)
    : TriSeries(order, x0, xi0, std::vector<double>(static_cast<size_t>(idx_l(order)), 0.0)) {}

TriSeries::TriSeries(int order, double x0, double xi0, std::vector<double> coeffs)
    : order_(order), x0_(x0), xi0_(xi0), coeffs_(std::move(coeffs)) {
    if (order < 0)
        throw OrderError("series order must be nonnegative");
    if (static_cast<std::int64_t>(coeffs_.size()) != idx_l(order))
        throw DimensionMismatch("coefficient vector length does not match l(N)");
}

double TriSeries::coeff(int i, int j) const {
    if (j < 0 || j > i || i > order_)
        throw IndexError("coefficient index outside the triangular set");
    return coeffs_[static_cast<size_t>(midx0(i, j))];
}

void TriSeries::set_coeff(int i, int j, double v) {
    if (j < 0 || j > i || i > order_)
        throw IndexError("coefficient index outside the triangular set");
    coeffs_[static_cast<size_t>(midx0(i, j))] = v;
}

TriSeries TriSeries::truncated(int r) const {
    if (r < 0 || r > order_)
        throw OrderError("truncation order out of range");
    return TriSeries(r, x0_, xi0_,
                     std::vector<double>(coeffs_.begin(), coeffs_.begin() + idx_l(r)));
}

double TriSeries::eval(double x, double xi) const {
    const double u = x - x0_;
    const double v = xi - xi0_;
    std::vector<double> upow(static_cast<size_t>(order_) + 1, 1.0);
    std::vector<double> vpow(static_cast<size_t>(order_) + 1, 1.0);
    for (int k = 1; k <= order_; ++k) {
        upow[static_cast<size_t>(k)] = upow[static_cast<size_t>(k - 1)] * u;
        vpow[static_cast<size_t>(k)] = vpow[static_cast<size_t>(k - 1)] * v;
    }
    double acc = 0.0;
    for (int i = 0; i <= order_; ++i) {
        double deg = 0.0;
        for (int j = 0; j <= i; ++j)
            deg += coeffs_[static_cast<size_t>(midx0(i, j))] * upow[static_cast<size_t>(i - j)] *
                   vpow[static_cast<size_t>(j)];
        acc += deg;
    }
    return acc;
}

TriSeries TriSeries::derivative_x() const {
    if (order_ < 1)
        throw OrderError("cannot differentiate an order-0 series");
    TriSeries out(order_ - 1, x0_, xi0_);
    for (int i = 1; i <= order_; ++i)
        for (int j = 0; j < i; ++j)
            out.set_coeff(i - 1, j, static_cast<double>(i - j) * coeff(i, j));
    return out;
}

TriSeries TriSeries::derivative_xi() const {
    if (order_ < 1)
        throw OrderError("cannot differentiate an order-0 series");
    TriSeries out(order_ - 1, x0_, xi0_);
    for (int i = 1; i <= order_; ++i)
        for (int j = 1; j <= i; ++j)
            out.set_coeff(i - 1, j - 1, static_cast<double>(j) * coeff(i, j));
    return out;
}

// --- OpMatrix --------------------------------------------------------------

OpMatrix::OpMatrix(OpKind kind, std::int64_t rows, std::int64_t cols,
                   std::vector<Entry> entries)
    : kind_(kind), rows_(rows), cols_(cols), entries_(std::move(entries)) {
    std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
        return a.col != b.col ? a.col < b.col : a.row < b.row;
    });
    for (size_t k = 0; k < entries_.size(); ++k) {
        const Entry& e = entries_[k];
        if (e.row < 0 || e.row >= rows_ || e.col < 0 || e.col >= cols_)
            throw IndexError("matrix entry out of range");
        if (k > 0 && entries_[k - 1].row == e.row && entries_[k - 1].col == e.col)
            throw IndexError("duplicate (row, col) entry");
    }
}

std::vector<double> OpMatrix::apply(std::span<const double> kappa) const {
    if (static_cast<std::int64_t>(kappa.size()) != rows_)
        throw DimensionMismatch("coefficient vector length does not match matrix rows");
    std::vector<double> out(static_cast<size_t>(cols_), 0.0);
    for (const Entry& e : entries_)
        out[static_cast<size_t>(e.col)] += e.value * kappa[static_cast<size_t>(e.row)];
    return out;
}

OpMatrix OpMatrix::compose(const OpMatrix& rhs) const {
    if (cols_ != rhs.rows_)
        throw DimensionMismatch("inner dimensions do not match in compose");
    // Group rhs entries by row for streaming accumulation.
    std::vector<std::vector<Entry>> by_row(static_cast<size_t>(rhs.rows_));
    for (const Entry& e : rhs.entries_)
        by_row[static_cast<size_t>(e.row)].push_back(e);
    std::map<std::pair<std::int64_t, std::int64_t>, double> acc;
    for (const Entry& a : entries_)
        for (const Entry& b : by_row[static_cast<size_t>(a.col)])
            acc[{a.row, b.col}] += a.value * b.value;
    std::vector<Entry> out;
    out.reserve(acc.size());
    for (const auto& [rc, v] : acc)
        if (v != 0.0)
            out.push_back({rc.first, rc.second, v});
    return OpMatrix(OpKind::Composite, rows_, rhs.cols_, std::move(out));
}

OpMatrix OpMatrix::scaled(double s) const {
    std::vector<Entry> out;
    out.reserve(entries_.size());
    for (const Entry& e : entries_)
        if (e.value * s != 0.0)
            out.push_back({e.row, e.col, e.value * s});
    return OpMatrix(kind_, rows_, cols_, std::move(out));
}

OpMatrix OpMatrix::sum(std::span<const OpMatrix> terms) {
    if (terms.empty())
        throw DimensionMismatch("empty operator sum");
    std::int64_t rows = terms[0].rows(), cols = terms[0].cols();
    std::map<std::pair<std::int64_t, std::int64_t>, double> acc;
    for (const OpMatrix& t : terms) {
        if (t.rows() != rows || t.cols() != cols)
            throw DimensionMismatch("operator shapes differ in sum");
        for (const Entry& e : t.entries())
            acc[{e.row, e.col}] += e.value;
    }
    std::vector<Entry> out;
    out.reserve(acc.size());
    for (const auto& [rc, v] : acc)
        if (v != 0.0)
            out.push_back({rc.first, rc.second, v});
    return OpMatrix(OpKind::Composite, rows, cols, std::move(out));
}

void OpMatrix::write_csv(std::ostream& os) const {
    os << "row,col,value\n";
    for (const Entry& e : entries_)
        os << (e.row + 1) << ',' << (e.col + 1) << ',' << e.value << '\n';
}

// --- builders ---------------------------------------------------------------

OpMatrix build_dx(int N) {
    if (N < 1)
        throw OrderError("build_dx needs N >= 1");
    std::vector<OpMatrix::Entry> es;
    es.reserve(static_cast<size_t>(idx_l(N - 1)));
    for (int i = 0; i <= N - 1; ++i)
        for (int j = 0; j <= i; ++j)
            es.push_back({midx0(i + 1, j), midx0(i, j), static_cast<double>(i - j + 1)});
    return OpMatrix(OpKind::DerivativeX, idx_l(N), idx_l(N), std::move(es));
}

OpMatrix build_dxi(int N) {
    if (N < 1)
        throw OrderError("build_dxi needs N >= 1");
    std::vector<OpMatrix::Entry> es;
    es.reserve(static_cast<size_t>(idx_l(N - 1)));
    for (int i = 0; i <= N - 1; ++i)
        for (int j = 0; j <= i; ++j)
            es.push_back({midx0(i + 1, j + 1), midx0(i, j), static_cast<double>(j + 1)});
    return OpMatrix(OpKind::DerivativeXi, idx_l(N), idx_l(N), std::move(es));
}

OpMatrix build_second_order(int N, SecondOrder which) {
    if (N < 2)
        throw OrderError("second-order derivative needs N >= 2");
    OpMatrix first = which == SecondOrder::XiXi ? build_dxi(N) : build_dx(N);
    OpMatrix second = which == SecondOrder::XX ? build_dx(N) : build_dxi(N);
    OpMatrix composed = first.compose(second);
    std::vector<OpMatrix::Entry> kept;
    const std::int64_t cols = idx_l(N - 2);
    for (const OpMatrix::Entry& e : composed.entries())
        if (e.col < cols)
            kept.push_back(e);
    OpKind kind = which == SecondOrder::XX     ? OpKind::DerivativeXX
                  : which == SecondOrder::XiXi ? OpKind::DerivativeXiXi
                                               : OpKind::DerivativeXXi;
    return OpMatrix(kind, idx_l(N), cols, std::move(kept));
}

OpMatrix build_mul_xi(const UniSeries& lam, int N, int out_order) {
    if (out_order < 0 || out_order > N)
        throw OrderError("mul-xi output order out of range");
    std::vector<OpMatrix::Entry> es;
    for (int i = 0; i <= out_order; ++i)
        for (int j = 0; j <= i; ++j)
            for (int q = 0; q <= std::min(j, lam.order()); ++q)
                if (lam[q] != 0.0)
                    es.push_back({midx0(i - q, j - q), midx0(i, j), lam[q]});
    return OpMatrix(OpKind::MulXi, idx_l(N), idx_l(out_order), std::move(es));
}

OpMatrix build_mul_x(const UniSeries& a, int N, int out_order) {
    if (out_order < 0 || out_order > N)
        throw OrderError("mul-x output order out of range");
    std::vector<OpMatrix::Entry> es;
    for (int i = 0; i <= out_order; ++i)
        for (int j = 0; j <= i; ++j)
            for (int q = 0; q <= std::min(i - j, a.order()); ++q)
                if (a[q] != 0.0)
                    es.push_back({midx0(i - q, j), midx0(i, j), a[q]});
    return OpMatrix(OpKind::MulX, idx_l(N), idx_l(out_order), std::move(es));
}

OpMatrix build_trace(double alpha, double gamma, int N) {
    if (N < 0)
        throw OrderError("trace needs N >= 0");
    // Pascal triangle for exact binomials up to N.
    std::vector<std::vector<double>> binom(static_cast<size_t>(N) + 1);
    for (int n = 0; n <= N; ++n) {
        binom[static_cast<size_t>(n)].assign(static_cast<size_t>(n) + 1, 1.0);
        for (int k = 1; k < n; ++k)
            binom[static_cast<size_t>(n)][static_cast<size_t>(k)] =
                binom[static_cast<size_t>(n - 1)][static_cast<size_t>(k - 1)] +
                binom[static_cast<size_t>(n - 1)][static_cast<size_t>(k)];
    }
    std::vector<double> apow(static_cast<size_t>(N) + 1, 1.0);
    std::vector<double> gpow(static_cast<size_t>(N) + 1, 1.0);
    for (int k = 1; k <= N; ++k) {
        apow[static_cast<size_t>(k)] = apow[static_cast<size_t>(k - 1)] * alpha;
        gpow[static_cast<size_t>(k)] = gpow[static_cast<size_t>(k - 1)] * gamma;
    }
    // x^(a-b) (alpha x + gamma)^b contributes C(b,m) alpha^m gamma^(b-m)
    // to degree a-b+m, 0 <= m <= b.
    std::vector<OpMatrix::Entry> es;
    for (int a = 0; a <= N; ++a) {
        for (int b = 0; b <= a; ++b) {
            for (int m = 0; m <= b; ++m) {
                double v = binom[static_cast<size_t>(b)][static_cast<size_t>(m)] *
                           apow[static_cast<size_t>(m)] * gpow[static_cast<size_t>(b - m)];
                if (v != 0.0)
                    es.push_back({midx0(a, b), a - b + m, v});
            }
        }
    }
    return OpMatrix(OpKind::Trace, idx_l(N), N + 1, std::move(es));
}

OpMatrix build_truncate(int N, int r) {
    if (r < 0 || r > N)
        throw OrderError("truncation order out of range");
    std::vector<OpMatrix::Entry> es;
    es.reserve(static_cast<size_t>(idx_l(r)));
    for (std::int64_t k = 0; k < idx_l(r); ++k)
        es.push_back({k, k, 1.0});
    return OpMatrix(OpKind::Truncate, idx_l(N), idx_l(r), std::move(es));
}

OpMatrix build_uni_derivative(int N) {
    if (N < 1)
        throw OrderError("uni-derivative needs N >= 1");
    std::vector<OpMatrix::Entry> es;
    es.reserve(static_cast<size_t>(N));
    for (int i = 1; i <= N; ++i)
        es.push_back({i, i - 1, static_cast<double>(i)});
    return OpMatrix(OpKind::UniDerivative, N + 1, N + 1, std::move(es));
}

OpMatrix build_uni_mul(const UniSeries& c, int N) {
    std::vector<OpMatrix::Entry> es;
    for (int k = 0; k <= N; ++k)
        for (int q = 0; q <= std::min(k, c.order()); ++q)
            if (c[q] != 0.0)
                es.push_back({k - q, k, c[q]});
    return OpMatrix(OpKind::UniMul, N + 1, N + 1, std::move(es));
}

std::vector<double> affine_compose(std::span<const double> f, double alpha, double gamma) {
    const int n = static_cast<int>(f.size()) - 1;
    // Horner on polynomials: g <- g*(alpha x + gamma) + f_k, k = n-1 .. 0.
    std::vector<double> g(f.size(), 0.0);
    g[0] = f[static_cast<size_t>(n)];
    for (int k = n - 1; k >= 0; --k) {
        for (int d = n - k; d >= 1; --d)
            g[static_cast<size_t>(d)] =
                alpha * g[static_cast<size_t>(d - 1)] + gamma * g[static_cast<size_t>(d)];
        g[0] = gamma * g[0] + f[static_cast<size_t>(k)];
    }
    return g;
}

} // namespace psk
