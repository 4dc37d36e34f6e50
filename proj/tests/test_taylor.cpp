#include <doctest.h>

#include <cmath>
#include <random>

#include "psk/taylor.hpp"
#include "test_util.hpp"

using namespace psk;
using E = CoeffExpr;

namespace {

// High-order central finite differences of f at x0 (independent oracle for
// the Taylor coefficients c0..c2).
template <typename F>
std::vector<double> fd_taylor3(F f, double x0) {
    const double h = 1e-2;
    double f0 = f(x0);
    double fp1 = f(x0 + h), fm1 = f(x0 - h);
    double fp2 = f(x0 + 2 * h), fm2 = f(x0 - 2 * h);
    double fp3 = f(x0 + 3 * h), fm3 = f(x0 - 3 * h);
    // 6th-order first derivative, 6th-order second derivative
    double d1 = (45.0 * (fp1 - fm1) - 9.0 * (fp2 - fm2) + (fp3 - fm3)) / (60.0 * h);
    double d2 = (-490.0 * f0 + 270.0 * (fp1 + fm1) - 27.0 * (fp2 + fm2) + 2.0 * (fp3 + fm3)) /
                (180.0 * h * h);
    return {f0, d1, d2 / 2.0};
}

} // namespace

TEST_CASE("expand: exponential and sine Maclaurin coefficients") {
    UniSeries e = expand(E::exp(E::var()), 0.0, 3);
    CHECK(e[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(e[1] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(e[2] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(e[3] == doctest::Approx(1.0 / 6.0).epsilon(1e-15));

    UniSeries s = expand(E::sin(E::mul(E::constant(3.0), E::var())), 0.0, 3);
    CHECK(s[0] == doctest::Approx(0.0));
    CHECK(s[1] == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(s[2] == doctest::Approx(0.0));
    CHECK(s[3] == doctest::Approx(-4.5).epsilon(1e-15));
}

TEST_CASE("expand: sqrt(0.5 + x^2) about 0.7 against the finite-difference oracle") {
    E f = E::sqrt(E::add(E::constant(0.5), E::pow(E::var(), 2)));
    UniSeries s = expand(f, 0.7, 2);
    auto fd = fd_taylor3([](double x) { return std::sqrt(0.5 + x * x); }, 0.7);
    CHECK(s[0] == doctest::Approx(fd[0]).epsilon(1e-11));
    CHECK(s[1] == doctest::Approx(fd[1]).epsilon(1e-9));
    CHECK(s[2] == doctest::Approx(fd[2]).epsilon(1e-8));
    // Frozen closed-form values: f(0.7) = sqrt(0.99), f' = 0.7/sqrt(0.99),
    // f''/2 = 0.25/0.99^1.5.
    CHECK(s[0] == doctest::Approx(0.9949874371066199).epsilon(1e-14));
    CHECK(s[1] == doctest::Approx(0.7035264706814485).epsilon(1e-14));
    CHECK(s[2] == doctest::Approx(0.2537974280957606).epsilon(1e-12));
}

TEST_CASE("series arithmetic basics") {
    UniSeries x(0.0, {0.0, 1.0, 0.0});
    UniSeries xx = x.mul(x);
    CHECK(xx[0] == 0.0);
    CHECK(xx[1] == 0.0);
    CHECK(xx[2] == 1.0);

    UniSeries one_x = UniSeries(0.0, {1.0, 0.0}).add(UniSeries(0.0, {0.0, 1.0}));
    CHECK(one_x[0] == 1.0);
    CHECK(one_x[1] == 1.0);

    UniSeries q = UniSeries(0.0, {1.0, 1.0, 0.5}).div(UniSeries(0.0, {1.0, 0.0, 0.0}));
    CHECK(q[0] == 1.0);
    CHECK(q[1] == 1.0);
    CHECK(q[2] == 0.5);
}

TEST_CASE("series arithmetic error paths") {
    UniSeries a(0.0, {1.0, 2.0});
    UniSeries b(0.5, {1.0, 2.0});
    CHECK_THROWS_AS(a.add(b), CenterMismatch);
    CHECK_THROWS_AS(a.div(UniSeries(0.0, {0.0, 1.0})), DivisionByZeroSeries);
    CHECK_THROWS_AS(UniSeries(0.0, {2.0}).derivative(), OrderError);
    CHECK_THROWS_AS(expand(E::var(), 0.0, -1), OrderError);
    CHECK_THROWS_AS(expand(E::sqrt(E::constant(-1.0)), 0.0, 2), DomainError);
    CHECK_THROWS_AS(expand(E::div(E::constant(1.0), E::var()), 0.0, 2), DomainError);
    CHECK_THROWS_AS(expand(E::sqrt(E::var()), 0.0, 2), DomainError); // branch point
}

TEST_CASE("series derivative examples") {
    UniSeries s(0.0, {0.0, 3.0, 0.0, -4.5});
    UniSeries d = s.derivative();
    CHECK(d.order() == 2);
    CHECK(d[0] == 3.0);
    CHECK(d[1] == 0.0);
    CHECK(d[2] == -13.5);

    UniSeries p = expand(E::add(E::constant(2.0), E::pow(E::var(), 3)), 0.0, 3).derivative();
    CHECK(p[0] == 0.0);
    CHECK(p[1] == 0.0);
    CHECK(p[2] == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("series antiderivative with lower limits") {
    UniSeries c6(0.0, {6.0});
    UniSeries i0 = c6.antiderivative(0.0);
    CHECK(i0[0] == 0.0);
    CHECK(i0[1] == 6.0);

    UniSeries x(0.0, {0.0, 1.0});
    UniSeries ix = x.antiderivative(0.0);
    CHECK(ix[0] == 0.0);
    CHECK(ix[1] == 0.0);
    CHECK(ix[2] == 0.5);

    UniSeries one(3.0, {1.0});
    UniSeries shifted = one.antiderivative(-0.7);
    CHECK(shifted[0] == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(shifted[1] == 1.0);
}

TEST_CASE("series evaluation") {
    CHECK(UniSeries(0.0, {1.0, 1.0, 0.5}).eval(1.0) == doctest::Approx(2.5));
    CHECK(UniSeries(0.0, {0.0, 3.0}).eval(2.0) == doctest::Approx(6.0));
    CHECK(expand(E::exp(E::var()), 0.0, 20).eval(1.0) ==
          doctest::Approx(std::exp(1.0)).epsilon(1e-12));
}

TEST_CASE("property: expression derivative matches series derivative") {
    std::mt19937_64 rng(20240811);
    for (int trial = 0; trial < 60; ++trial) {
        E f = psk_test::random_expr(rng);
        double center = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
        UniSeries via_expr = expand(f.derivative(), center, 11);
        UniSeries via_series = expand(f, center, 12).derivative();
        double scale = 0.0;
        for (int i = 0; i <= 11; ++i)
            scale = std::max(scale, std::abs(via_expr[i]));
        for (int i = 0; i <= 11; ++i)
            CHECK(std::abs(via_expr[i] - via_series[i]) <= 1e-12 * std::max(scale, 1.0));
    }
}

TEST_CASE("property: multiplication is commutative and associative") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 40; ++trial) {
        UniSeries a(0.0, psk_test::random_vector(rng, 9));
        UniSeries b(0.0, psk_test::random_vector(rng, 9));
        UniSeries c(0.0, psk_test::random_vector(rng, 9));
        UniSeries ab = a.mul(b), ba = b.mul(a);
        UniSeries abc1 = a.mul(b).mul(c), abc2 = a.mul(b.mul(c));
        for (int i = 0; i <= 8; ++i) {
            CHECK(ab[i] == doctest::Approx(ba[i]).epsilon(1e-13));
            CHECK(abc1[i] == doctest::Approx(abc2[i]).epsilon(1e-13));
        }
    }
}

TEST_CASE("property: evaluation converges inside the radius") {
    E x = E::var();
    E rational = E::div(E::constant(1.0), E::add(E::constant(2.0), x));
    struct Case {
        E f;
        double at;
        double want;
    } cases[] = {
        {E::exp(x), 0.8, std::exp(0.8)},
        {E::sin(x), 1.1, std::sin(1.1)},
        {rational, 0.9, 1.0 / 2.9},
    };
    for (const auto& c : cases) {
        double prev = std::abs(expand(c.f, 0.0, 4).eval(c.at) - c.want);
        double last = std::abs(expand(c.f, 0.0, 30).eval(c.at) - c.want);
        CHECK(last < prev);
        CHECK(last <= 1e-10);
    }
}

TEST_CASE("property: re-expansion of polynomials is exact") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 25; ++trial) {
        E x = E::var();
        E f = E::constant(0.0);
        std::uniform_real_distribution<double> coeff(-2.0, 2.0);
        for (int k = 0; k <= 5; ++k)
            f = E::add(f, E::mul(E::constant(coeff(rng)), E::pow(x, k)));
        double c1 = coeff(rng), c2 = coeff(rng);
        UniSeries at1 = expand(f, c1, 8);
        UniSeries at2 = expand(f, c2, 8);
        // shift the c1-expansion analytically: g(u) = f(c2 + u) with
        // c2 + u = c1 + (u + (c2 - c1))
        for (int i = 0; i <= 8; ++i) {
            double direct = at2[i];
            // binomial re-expansion of sum a_k ((c2-c1) + u)^k
            double shifted = 0.0;
            double d = c2 - c1;
            for (int k = i; k <= 8; ++k) {
                double binom = 1.0;
                for (int m = 0; m < i; ++m)
                    binom = binom * static_cast<double>(k - m) / static_cast<double>(m + 1);
                shifted += at1[k] * binom * std::pow(d, k - i);
            }
            CHECK(direct == doctest::Approx(shifted).epsilon(1e-12));
        }
    }
}

TEST_CASE("expression JSON round-trip") {
    std::mt19937_64 rng(1234);
    for (int trial = 0; trial < 20; ++trial) {
        E f = psk_test::random_expr(rng);
        E back = E::from_json(f.to_json());
        CHECK(back.equals(f));
    }
    CHECK_THROWS_AS(E::from_json("{\"op\":\"nope\"}"), SchemaError);
    CHECK_THROWS_AS(E::from_json("not json"), SchemaError);
}
