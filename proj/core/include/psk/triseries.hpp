#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "psk/errors.hpp"
#include "psk/taylor.hpp"

namespace psk {

/// l(i) = (i+1)(i+2)/2: number of coefficients with total degree <= i.
/// l(-1) = 0 by convention (empty block).
constexpr std::int64_t idx_l(std::int64_t i) {
    return (i + 1) * (i + 2) / 2;
}

/// Reporting-convention (1-based) position of coefficient (i,j): l(i-1)+j+1.
inline std::int64_t idx_m(int i, int j) {
    if (j < 0 || j > i)
        throw IndexError("coefficient index outside the triangular set");
    return idx_l(i - 1) + j + 1;
}

/// 0-based position used internally throughout.
inline std::int64_t midx0(int i, int j) { return idx_l(i - 1) + j; }

/// Truncated bivariate power series on the triangular index set i+j <= N:
/// coeffs()[midx0(i,j)] multiplies (x - x0)^(i-j) (xi - xi0)^j. The total
/// degree of the (i,j) monomial is i.
class TriSeries {
public:
    TriSeries(int order, double x0, double xi0);
    TriSeries(int order, double x0, double xi0, std::vector<double> coeffs);

    int order() const { return order_; }
    double x0() const { return x0_; }
    double xi0() const { return xi0_; }
    std::span<const double> coeffs() const { return coeffs_; }

    double coeff(int i, int j) const;
    void set_coeff(int i, int j, double v);

    /// Keeps the first l(r) coefficients.
    TriSeries truncated(int r) const;

    /// Direct evaluation, degree by degree.
    double eval(double x, double xi) const;

    /// Exact polynomial partial derivatives (order drops by one).
    TriSeries derivative_x() const;
    TriSeries derivative_xi() const;

private:
    int order_;
    double x0_, xi0_;
    std::vector<double> coeffs_;
};

/// Which operator an OpMatrix implements (for diagnostics and dumps).
enum class OpKind {
    DerivativeX,
    DerivativeXi,
    DerivativeXX,
    DerivativeXiXi,
    DerivativeXXi,
    MulXi,
    MulX,
    Trace,
    Truncate,
    UniDerivative,
    UniMul,
    Composite,
};

/// Sparse transformation matrix acting on series coefficient row vectors,
/// kappa_out = kappa_in * R (the source index is the row, the target the
/// column). rows() is the source dimension, cols() the target dimension.
class OpMatrix {
public:
    struct Entry {
        std::int64_t row;
        std::int64_t col;
        double value;
    };

    OpMatrix(OpKind kind, std::int64_t rows, std::int64_t cols, std::vector<Entry> entries);

    OpKind kind() const { return kind_; }
    std::int64_t rows() const { return rows_; }
    std::int64_t cols() const { return cols_; }
    std::span<const Entry> entries() const { return entries_; }
    std::int64_t nnz() const { return static_cast<std::int64_t>(entries_.size()); }

    /// kappa * R for a length-rows() coefficient vector.
    std::vector<double> apply(std::span<const double> kappa) const;

    /// this followed by rhs: (rows x p) . (p x cols).
    OpMatrix compose(const OpMatrix& rhs) const;

    OpMatrix scaled(double s) const;

    /// Entry-wise sum (shapes must match); exact zeros are pruned.
    static OpMatrix sum(std::span<const OpMatrix> terms);

    /// Debug triplet CSV: "row,col,value" (1-based indices).
    void write_csv(std::ostream& os) const;

private:
    OpKind kind_;
    std::int64_t rows_, cols_;
    std::vector<Entry> entries_; // sorted by (col, row); unique; no exact zeros
};

/// d/dx on an order-N triangular series; l(N) x l(N), the image has order
/// N-1. Column midx0(i,j) holds (i-j+1) at row midx0(i+1,j).
OpMatrix build_dx(int N);

/// d/dxi analog: (j+1) at row midx0(i+1,j+1).
OpMatrix build_dxi(int N);

enum class SecondOrder { XX, XiXi, XXi };

/// Composed second derivative, first l(N-2) columns kept: l(N) x l(N-2).
OpMatrix build_second_order(int N, SecondOrder which);

/// Multiplication by an analytic function of xi given as a series in the
/// series' xi coordinate: target (i,j) accumulates lam_q * K_(i-q)(j-q).
/// l(N) x l(out_order).
OpMatrix build_mul_xi(const UniSeries& lam, int N, int out_order);

/// Multiplication by a function of x: target (i,j) accumulates
/// a_q * K_(i-q)j for q <= i-j. l(N) x l(out_order).
OpMatrix build_mul_x(const UniSeries& a, int N, int out_order);

/// Trace along the affine line xi = alpha*x + gamma (series coordinates):
/// l(N) x (N+1); column k holds the x^k coefficient contributions
/// C(b, k-a+b) alpha^(k-a+b) gamma^(a-k) from source (a,b).
OpMatrix build_trace(double alpha, double gamma, int N);

/// Identity on the first l(r) coefficients: l(N) x l(r).
OpMatrix build_truncate(int N, int r);

/// d/dx on a trace polynomial coefficient vector: (N+1) x (N+1), top
/// degree mapped out (trailing zero column).
OpMatrix build_uni_derivative(int N);

/// Univariate multiplication of a trace polynomial by c(x): (N+1) x (N+1).
OpMatrix build_uni_mul(const UniSeries& c, int N);

/// Affine substitution g(x) = f(alpha*x + gamma) for polynomial
/// coefficients (same length; exact binomial redistribution).
std::vector<double> affine_compose(std::span<const double> f, double alpha, double gamma);

} // namespace psk
