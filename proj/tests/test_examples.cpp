#include <doctest.h>

#include <cmath>

#include "psk/assembler.hpp"
#include "psk/examples.hpp"

using namespace psk;
using E = CoeffExpr;

namespace {

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v)
        m = std::max(m, std::abs(x));
    return m;
}

} // namespace

TEST_CASE("builder structure: example 1") {
    KernelProblem p = examples::example1(E::constant(3.0), 2.0, 3.0, 1.0);
    CHECK(p.n_kernels == 1);
    REQUIRE(p.pdes.size() == 1);
    CHECK(p.pdes[0].terms.size() == 3);
    REQUIRE(p.bcs.size() == 2);
    CHECK(p.bcs[0].line.alpha == 1.0);
    CHECK(p.bcs[0].line.gamma == 0.0);
    const auto& ir = std::get<IntegralRhs>(p.bcs[0].rhs);
    CHECK(ir.scale == doctest::Approx(-0.25)); // -1/(2 eps)
    CHECK(ir.lower == 0.0);
    CHECK(p.bcs[1].line.alpha == 0.0);
    CHECK_THROWS_AS(examples::example1(E::constant(3.0), -1.0, 3.0, 1.0), ParamError);
}

TEST_CASE("example 1: lambda = -c solves to the zero kernel") {
    KernelProblem p = examples::example1(E::constant(-3.0), 1.0, 3.0, 1.0);
    SolveReport rep = solve_problem(p, {8}, 1e-10, 0);
    CHECK(max_abs(rep.series_for(0).coeffs()) <= 1e-13);
}

TEST_CASE("example 2 reduces to example 1 for constant diffusion") {
    E x = E::var();
    E lam = E::add(E::constant(3.0), E::mul(E::pow(x, 2), E::sin(E::mul(E::constant(3.0), x))));
    const double eps = 2.0;
    KernelProblem p1 = examples::example1(lam, eps, 3.0, 1.0);
    KernelProblem p2 = examples::example2(lam, E::constant(eps), 3.0, 1.0);
    SolveReport r1 = solve_problem(p1, {18}, 1e-10, 0);
    SolveReport r2 = solve_problem(p2, {18}, 1e-10, 0);
    double scale = std::max(1.0, max_abs(r1.series_for(0).coeffs()));
    for (int i = 0; i <= 18; ++i)
        for (int j = 0; j <= i; ++j)
            CHECK(std::abs(r1.series_for(0).coeff(i, j) - r2.series_for(0).coeff(i, j)) <=
                  1e-10 * scale);
}

TEST_CASE("example 2 rejects nonpositive diffusion at the center") {
    CHECK_THROWS_AS(examples::example2(E::constant(3.0), E::constant(-1.0), 3.0, 1.0),
                    DomainError);
}

TEST_CASE("example 3: constant trace data shows up in the solved kernel") {
    // c3 constant and eps + mu constant: K^vu(x,x) = -c3/(eps + mu)
    E eps = E::constant(1.25);
    E mu = E::constant(0.75);
    E zero = E::constant(0.0);
    E c3 = E::constant(1.5);
    KernelProblem p = examples::example3(eps, mu, zero, zero, c3, zero, 1.0, 1.0);
    SolveReport rep = solve_problem(p, {12}, 1e-10, 0);
    for (int g = 0; g <= 10; ++g) {
        double x = g / 10.0;
        CHECK(rep.series_for(1).eval(x, x) == doctest::Approx(-1.5 / 2.0).epsilon(1e-10));
    }

    // all coupling coefficients zero: both kernels vanish
    KernelProblem pz = examples::example3(eps, mu, zero, zero, zero, zero, 1.0, 1.0);
    SolveReport rz = solve_problem(pz, {10}, 1e-10, 0);
    CHECK(max_abs(rz.series_for(0).coeffs()) <= 1e-13);
    CHECK(max_abs(rz.series_for(1).coeffs()) <= 1e-13);

    CHECK_THROWS_AS(examples::example3(eps, E::constant(0.0), zero, zero, c3, zero, 1.0, 1.0),
                    DomainError);
}

TEST_CASE("example 4 parameter checks and zero-coupling case") {
    CHECK_THROWS_AS(examples::example4(0.2, 1.0, E::constant(5.0), E::constant(2.0), 1.0),
                    ParamError);
    CHECK_THROWS_AS(examples::example4(1.0, -0.1, E::constant(5.0), E::constant(2.0), 1.0),
                    ParamError);
    KernelProblem p = examples::canonical_example4();
    REQUIRE(p.split.has_value());
    CHECK(p.split->beta == doctest::Approx(0.2));
    CHECK(p.split->kernels == std::vector<int>{0, 1});
}

TEST_CASE("every built-in builder validates cleanly") {
    struct Case {
        KernelProblem p;
        std::int64_t expected_dups;
    } cases[] = {
        {examples::canonical_example1(), 1},
        {examples::canonical_example2(), 0},
        {examples::canonical_example3(), 0},
        {examples::canonical_example4(), 0},
    };
    for (auto& c : cases) {
        ValidationReport rep = validate_problem(c.p, 6);
        CHECK(rep.ok());
        std::int64_t dups = 0;
        for (const auto& g : rep.groups) {
            CHECK(g.rows_after == g.unknowns);
            dups += g.duplicates_removed;
        }
        CHECK(dups == c.expected_dups);
    }
    // the localized example is overdetermined by one row, by design
    ValidationReport r5 = validate_problem(examples::canonical_example5(), 6);
    CHECK(r5.ok());
    CHECK(r5.groups[0].rows_after == r5.groups[0].unknowns + 1);
}

TEST_CASE("canonical JSON of each builder parses and solves") {
    for (const KernelProblem& p :
         {examples::canonical_example1(), examples::canonical_example2(), examples::canonical_example3(),
          examples::canonical_example4()}) {
        KernelProblem back = parse_problem(serialize_problem(p));
        std::vector<int> orders(kernel_groups(back).size(), 6);
        SolveReport rep = solve_problem(back, orders, 1e-10, 0);
        CHECK(rep.kernels.size() >= 1);
    }
}

TEST_CASE("example 5 builder localizes example 1") {
    E x = E::var();
    E lam = E::sqrt(E::add(E::constant(0.5), E::pow(x, 2)));
    KernelProblem p = examples::example5(lam, 1.0, 3.0, 1.0, 0.5, 0.7);
    CHECK(p.x0 == 0.5);
    CHECK(p.xi0 == 0.7);
    CHECK(p.bcs[0].line.gamma == doctest::Approx(-0.2).epsilon(1e-15));
    CHECK(p.bcs[1].line.gamma == doctest::Approx(-0.7).epsilon(1e-15));
}
