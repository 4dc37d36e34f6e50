#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "psk/errors.hpp"

namespace psk {

class UniSeries;

/// Closed expression language for analytic coefficient functions of one
/// variable: constants, the variable, +, -, *, /, sin, cos, exp, sqrt and
/// integer powers. Immutable value type (shared structure underneath).
class CoeffExpr {
public:
    enum class Kind { Const, Var, Add, Sub, Mul, Div, Sin, Cos, Exp, Sqrt, Pow };
    struct Node; // opaque; defined in taylor.cpp

    CoeffExpr() : CoeffExpr(constant(0.0)) {}

    static CoeffExpr constant(double value);
    static CoeffExpr var();
    static CoeffExpr add(CoeffExpr a, CoeffExpr b);
    static CoeffExpr sub(CoeffExpr a, CoeffExpr b);
    static CoeffExpr mul(CoeffExpr a, CoeffExpr b);
    static CoeffExpr div(CoeffExpr a, CoeffExpr b);
    static CoeffExpr sin(CoeffExpr a);
    static CoeffExpr cos(CoeffExpr a);
    static CoeffExpr exp(CoeffExpr a);
    static CoeffExpr sqrt(CoeffExpr a);
    /// Integer power. Negative exponents require a nonzero base at the
    /// expansion point (quotient semantics).
    static CoeffExpr pow(CoeffExpr base, int exponent);

    Kind kind() const;
    double value() const;    // Const nodes
    int exponent() const;    // Pow nodes
    CoeffExpr lhs() const;
    CoeffExpr rhs() const;

    /// Pointwise evaluation. Throws DomainError on zero denominators or
    /// negative radicands.
    double eval(double x) const;

    /// Exact derivative expression (the language is closed under d/dx).
    CoeffExpr derivative() const;

    /// Structural equality (same tree, bit-equal constants).
    bool equals(const CoeffExpr& other) const;

    /// Tagged-node JSON, e.g. {"op":"add","args":[{"op":"const","value":3.0},...]}.
    std::string to_json() const;
    static CoeffExpr from_json(const std::string& text);

private:
    explicit CoeffExpr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
    std::shared_ptr<const Node> node_;

    friend class ExprJson;
    friend UniSeries expand(const CoeffExpr& expr, double center, int order);
};

CoeffExpr operator+(const CoeffExpr& a, const CoeffExpr& b);
CoeffExpr operator-(const CoeffExpr& a, const CoeffExpr& b);
CoeffExpr operator*(const CoeffExpr& a, const CoeffExpr& b);
CoeffExpr operator/(const CoeffExpr& a, const CoeffExpr& b);

/// Truncated univariate Taylor series about a fixed expansion point.
/// coeffs()[i] multiplies (x - center)^i. Immutable after construction.
class UniSeries {
public:
    UniSeries(double center, std::vector<double> coeffs);

    int order() const { return static_cast<int>(coeffs_.size()) - 1; }
    double center() const { return center_; }
    std::span<const double> coeffs() const { return coeffs_; }
    double operator[](int i) const { return coeffs_[static_cast<size_t>(i)]; }

    UniSeries add(const UniSeries& other) const;
    UniSeries sub(const UniSeries& other) const;
    UniSeries mul(const UniSeries& other) const;
    UniSeries div(const UniSeries& other) const;
    UniSeries scale(double s) const;

    /// Drops one order; coefficient i becomes (i+1) * coeffs[i+1].
    UniSeries derivative() const;

    /// Gains one order; the constant term makes the result vanish at
    /// `lower`, expressed in the series' own (shifted) coordinate.
    UniSeries antiderivative(double lower) const;

    /// Horner evaluation of sum a_i (x - center)^i.
    double eval(double x) const;

    /// Truncation to a lower order (identity if r == order()).
    UniSeries truncated(int r) const;

private:
    double center_;
    std::vector<double> coeffs_;
};

/// Taylor coefficients of `expr` about `center`, exact up to round-off,
/// computed by Taylor-mode recurrences (sin/cos jointly, exp and sqrt via
/// their ODE recurrences, quotient by convolution back-substitution).
UniSeries expand(const CoeffExpr& expr, double center, int order);

} // namespace psk
