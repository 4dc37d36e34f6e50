#pragma once

#include "psk/problem.hpp"

namespace psk {
namespace examples {

/// Reaction-diffusion kernel problem:
///   K_xx - K_xixi = ((lambda(xi)+c)/eps) K,
///   K(x,x) = -(1/(2 eps)) Int_0^x (lambda+c),  K(x,0) = 0.
KernelProblem example1(const CoeffExpr& lam, double eps, double c, double L);

/// Space-varying diffusion:
///   eps(x) K_xx - eps(xi) K_xixi = (lambda(xi)+c) K,
///   2 eps(x) d/dx K(x,x) + eps'(x) K(x,x) = -lambda(x) - c,  K(x,0) = 0.
KernelProblem example2(const CoeffExpr& lam, const CoeffExpr& eps, double c, double L);

/// 2x2 hyperbolic system with space-varying coefficients; kernels
/// K^vv (index 0) and K^vu (index 1):
///   mu(x) Kx^vv + mu(xi) Kxi^vv + mu'(xi) K^vv
///       = (c2(xi) + c4(x) - c4(xi)) K^vu,
///   mu(x) Kx^vu - eps(xi) Kxi^vu - eps'(xi) K^vu
///       = (c3(xi) + c4(x) - c1(xi)) K^vv,
///   K^vv(x,0) = (q eps(0)/mu(0)) K^vu(x,0),
///   (eps(x)+mu(x)) K^vu(x,x) = -c3(x).
KernelProblem example3(const CoeffExpr& eps, const CoeffExpr& mu, const CoeffExpr& c1,
                       const CoeffExpr& c2, const CoeffExpr& c3, const CoeffExpr& c4, double q,
                       double L);

/// Motion-planning kernels for the (0+2)x(0+2) hyperbolic system with
/// constant transport speeds mu1 > mu2 > 0; kernels L11..L22 are indices
/// 0..3. The (L11, L12) pair is split along the characteristic
/// xi = (mu2/mu1) x: region A (below) carries the xi = 0 data, region B
/// the xi = x trace, with L11 continuous across the line.
KernelProblem example4(double mu1, double mu2, const CoeffExpr& s12, const CoeffExpr& s21,
                       double L);

/// example1 localized at (x0, xi0).
KernelProblem example5(const CoeffExpr& lam, double eps, double c, double L, double x0,
                       double xi0);

/// Canonical built-in instances (the documented default parameters).
KernelProblem canonical_example1();
KernelProblem canonical_example2();
KernelProblem canonical_example3();
KernelProblem canonical_example4();
KernelProblem canonical_example5();

} // namespace examples
} // namespace psk
