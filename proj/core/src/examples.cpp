#include "psk/examples.hpp"

namespace psk {
namespace examples {

namespace {

using E = CoeffExpr;

PdeTerm term(int kernel, std::optional<E> a, std::optional<E> b, int dx, int dxi, double w) {
    PdeTerm t;
    t.kernel = kernel;
    t.a_of_x = std::move(a);
    t.b_of_xi = std::move(b);
    t.dx = dx;
    t.dxi = dxi;
    t.weight = w;
    return t;
}

BoundaryTerm bterm(int kernel, std::optional<E> c, int trace_deriv) {
    BoundaryTerm t;
    t.kernel = kernel;
    t.c_of_x = std::move(c);
    t.trace_deriv = trace_deriv;
    return t;
}

E neg(const E& e) { return E::mul(E::constant(-1.0), e); }

} // namespace

KernelProblem example1(const E& lam, double eps, double c, double L) {
    if (eps <= 0.0)
        throw ParamError("example1 needs eps > 0");
    if (L <= 0.0)
        throw ParamError("example1 needs L > 0");
    KernelProblem p;
    p.n_kernels = 1;
    p.domain_length = L;

    E lam_c = E::add(lam, E::constant(c));
    PdeConstraint pde;
    pde.terms.push_back(term(0, std::nullopt, std::nullopt, 2, 0, 1.0));
    pde.terms.push_back(term(0, std::nullopt, std::nullopt, 0, 2, -1.0));
    pde.terms.push_back(term(0, std::nullopt, lam_c, 0, 0, -1.0 / eps));
    p.pdes.push_back(std::move(pde));

    BoundaryConstraint bc1;
    bc1.line = {1.0, 0.0};
    bc1.terms.push_back(bterm(0, std::nullopt, 0));
    bc1.rhs = IntegralRhs{lam_c, 0.0, -0.5 / eps};
    p.bcs.push_back(std::move(bc1));

    BoundaryConstraint bc2;
    bc2.line = {0.0, 0.0};
    bc2.terms.push_back(bterm(0, std::nullopt, 0));
    bc2.rhs = E::constant(0.0);
    p.bcs.push_back(std::move(bc2));
    return p;
}

KernelProblem example2(const E& lam, const E& eps, double c, double L) {
    if (L <= 0.0)
        throw ParamError("example2 needs L > 0");
    if (eps.eval(0.0) <= 0.0)
        throw DomainError("example2 needs eps > 0 at the expansion point");
    KernelProblem p;
    p.n_kernels = 1;
    p.domain_length = L;

    E lam_c = E::add(lam, E::constant(c));
    PdeConstraint pde;
    pde.terms.push_back(term(0, eps, std::nullopt, 2, 0, 1.0));
    pde.terms.push_back(term(0, std::nullopt, eps, 0, 2, -1.0));
    pde.terms.push_back(term(0, std::nullopt, lam_c, 0, 0, -1.0));
    p.pdes.push_back(std::move(pde));

    BoundaryConstraint bc1;
    bc1.line = {1.0, 0.0};
    bc1.terms.push_back(bterm(0, E::mul(E::constant(2.0), eps), 1));
    bc1.terms.push_back(bterm(0, eps.derivative(), 0));
    bc1.rhs = neg(lam_c);
    p.bcs.push_back(std::move(bc1));

    BoundaryConstraint bc2;
    bc2.line = {0.0, 0.0};
    bc2.terms.push_back(bterm(0, std::nullopt, 0));
    bc2.rhs = E::constant(0.0);
    p.bcs.push_back(std::move(bc2));
    return p;
}

KernelProblem example3(const E& eps, const E& mu, const E& c1, const E& c2, const E& c3,
                       const E& c4, double q, double L) {
    if (L <= 0.0)
        throw ParamError("example3 needs L > 0");
    double mu0 = mu.eval(0.0);
    if (mu0 == 0.0)
        throw DomainError("example3 needs mu(0) != 0");
    double eps0 = eps.eval(0.0);

    KernelProblem p;
    p.n_kernels = 2; // 0 = K^vv, 1 = K^vu
    p.domain_length = L;

    PdeConstraint vv;
    vv.terms.push_back(term(0, mu, std::nullopt, 1, 0, 1.0));
    vv.terms.push_back(term(0, std::nullopt, mu, 0, 1, 1.0));
    vv.terms.push_back(term(0, std::nullopt, mu.derivative(), 0, 0, 1.0));
    vv.terms.push_back(term(1, std::nullopt, c2, 0, 0, -1.0));
    vv.terms.push_back(term(1, c4, std::nullopt, 0, 0, -1.0));
    vv.terms.push_back(term(1, std::nullopt, c4, 0, 0, 1.0));
    p.pdes.push_back(std::move(vv));

    PdeConstraint vu;
    vu.terms.push_back(term(1, mu, std::nullopt, 1, 0, 1.0));
    vu.terms.push_back(term(1, std::nullopt, eps, 0, 1, -1.0));
    vu.terms.push_back(term(1, std::nullopt, eps.derivative(), 0, 0, -1.0));
    vu.terms.push_back(term(0, std::nullopt, c3, 0, 0, -1.0));
    vu.terms.push_back(term(0, c4, std::nullopt, 0, 0, -1.0));
    vu.terms.push_back(term(0, std::nullopt, c1, 0, 0, 1.0));
    p.pdes.push_back(std::move(vu));

    BoundaryConstraint bc1; // K^vv(x,0) - (q eps(0)/mu(0)) K^vu(x,0) = 0
    bc1.line = {0.0, 0.0};
    bc1.terms.push_back(bterm(0, std::nullopt, 0));
    bc1.terms.push_back(bterm(1, E::constant(-q * eps0 / mu0), 0));
    bc1.rhs = E::constant(0.0);
    p.bcs.push_back(std::move(bc1));

    BoundaryConstraint bc2; // (eps(x)+mu(x)) K^vu(x,x) = -c3(x)
    bc2.line = {1.0, 0.0};
    bc2.terms.push_back(bterm(1, E::add(eps, mu), 0));
    bc2.rhs = neg(c3);
    p.bcs.push_back(std::move(bc2));
    return p;
}

KernelProblem example4(double mu1, double mu2, const E& s12, const E& s21, double L) {
    if (!(mu1 > mu2 && mu2 > 0.0))
        throw ParamError("example4 needs mu1 > mu2 > 0");
    if (L <= 0.0)
        throw ParamError("example4 needs L > 0");

    KernelProblem p;
    p.n_kernels = 4; // 0=L11, 1=L12, 2=L21, 3=L22
    p.domain_length = L;

    auto transport = [&](int kernel, double mx, double mxi, int src, const E& sigma) {
        PdeConstraint c;
        c.terms.push_back(term(kernel, std::nullopt, std::nullopt, 1, 0, mx));
        c.terms.push_back(term(kernel, std::nullopt, std::nullopt, 0, 1, mxi));
        c.terms.push_back(term(src, std::nullopt, sigma, 0, 0, -1.0));
        return c;
    };
    p.pdes.push_back(transport(0, mu1, mu1, 1, s21)); // mu1 L11_x + mu1 L11_xi = s21 L12
    p.pdes.push_back(transport(1, mu1, mu2, 0, s12)); // mu1 L12_x + mu2 L12_xi = s12 L11
    p.pdes.push_back(transport(2, mu2, mu1, 3, s21)); // mu2 L21_x + mu1 L21_xi = s21 L22
    p.pdes.push_back(transport(3, mu2, mu2, 2, s12)); // mu2 L22_x + mu2 L22_xi = s12 L21

    // Single-region group (L21, L22).
    BoundaryConstraint l21_trace; // L21(x,x) = s21/(mu1-mu2)
    l21_trace.line = {1.0, 0.0};
    l21_trace.terms.push_back(bterm(2, std::nullopt, 0));
    l21_trace.rhs = E::mul(E::constant(1.0 / (mu1 - mu2)), s21);
    p.bcs.push_back(std::move(l21_trace));

    BoundaryConstraint l22_zero; // L22(x,0) = 0
    l22_zero.line = {0.0, 0.0};
    l22_zero.terms.push_back(bterm(3, std::nullopt, 0));
    l22_zero.rhs = E::constant(0.0);
    p.bcs.push_back(std::move(l22_zero));

    // Split group (L11, L12) along the L12 characteristic xi = (mu2/mu1) x.
    SplitSpec split;
    split.beta = mu2 / mu1;
    split.kernels = {0, 1};

    BoundaryConstraint l11_zero;
    l11_zero.line = {0.0, 0.0};
    l11_zero.terms.push_back(bterm(0, std::nullopt, 0));
    l11_zero.rhs = E::constant(0.0);
    split.region_a_bcs.push_back(std::move(l11_zero));

    BoundaryConstraint l12_zero;
    l12_zero.line = {0.0, 0.0};
    l12_zero.terms.push_back(bterm(1, std::nullopt, 0));
    l12_zero.rhs = E::constant(0.0);
    split.region_a_bcs.push_back(std::move(l12_zero));

    BoundaryConstraint l12_trace; // L12(x,x) = s12/(mu2-mu1)
    l12_trace.line = {1.0, 0.0};
    l12_trace.terms.push_back(bterm(1, std::nullopt, 0));
    l12_trace.rhs = E::mul(E::constant(1.0 / (mu2 - mu1)), s12);
    split.region_b_bcs.push_back(std::move(l12_trace));

    MatchingConstraint l11_cont; // L11 continuous across the split line
    l11_cont.kernel_a = 0;
    l11_cont.kernel_b = 0;
    split.matching.push_back(std::move(l11_cont));

    p.split = std::move(split);
    return p;
}

KernelProblem example5(const E& lam, double eps, double c, double L, double x0, double xi0) {
    return localize(example1(lam, eps, c, L), x0, xi0);
}

// --- canonical built-in instances ----------------------------------------------

KernelProblem canonical_example1() {
    // lambda(x) = 3 + x^2 sin(3x), L = eps = 1, c = 3.
    E x = E::var();
    E lam = E::add(E::constant(3.0),
                   E::mul(E::pow(x, 2), E::sin(E::mul(E::constant(3.0), x))));
    KernelProblem p = example1(lam, 1.0, 3.0, 1.0);
    p.default_orders = {25};
    return p;
}

KernelProblem canonical_example2() {
    // lambda(x) = 2 + x^2 cos(6 x^2), eps(x) = 3 + 2 x^3, L = 1, c = 3.
    E x = E::var();
    E lam = E::add(E::constant(2.0),
                   E::mul(E::pow(x, 2), E::cos(E::mul(E::constant(6.0), E::pow(x, 2)))));
    E eps = E::add(E::constant(3.0), E::mul(E::constant(2.0), E::pow(x, 3)));
    KernelProblem p = example2(lam, eps, 3.0, 1.0);
    p.default_orders = {40};
    return p;
}

KernelProblem canonical_example3() {
    // mu = 1.4 + x^3, eps = 1.3 + x^2, c1 = 3 exp(3x), c2 = sin(3x),
    // c3 = 1 + 2 cos(2x), c4 = 1/(3 + 1.5 x^3), q = 1, L = 1.
    E x = E::var();
    E mu = E::add(E::constant(1.4), E::pow(x, 3));
    E eps = E::add(E::constant(1.3), E::pow(x, 2));
    E c1 = E::mul(E::constant(3.0), E::exp(E::mul(E::constant(3.0), x)));
    E c2 = E::sin(E::mul(E::constant(3.0), x));
    E c3 = E::add(E::constant(1.0), E::mul(E::constant(2.0), E::cos(E::mul(E::constant(2.0), x))));
    E c4 = E::div(E::constant(1.0),
                  E::add(E::constant(3.0), E::mul(E::constant(1.5), E::pow(x, 3))));
    KernelProblem p = example3(eps, mu, c1, c2, c3, c4, 1.0, 1.0);
    p.default_orders = {40};
    return p;
}

KernelProblem canonical_example4() {
    // mu1 = 1, mu2 = 0.2, sigma12 = 5, sigma21 = 2; orders 8 and 40 per group.
    KernelProblem p =
        example4(1.0, 0.2, E::constant(5.0), E::constant(2.0), 1.0);
    p.default_orders = {8, 40};
    return p;
}

KernelProblem canonical_example5() {
    // lambda(x) = sqrt(0.5 + x^2) localized at (0.5, 0.7); eps, c from Example 1.
    E x = E::var();
    E lam = E::sqrt(E::add(E::constant(0.5), E::pow(x, 2)));
    KernelProblem p = example5(lam, 1.0, 3.0, 1.0, 0.5, 0.7);
    p.default_orders = {50};
    return p;
}

} // namespace examples
} // namespace psk
