#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "ssc/poly.hpp"

using namespace ssc;

namespace {

long long binom(int n, int k) {
    long long r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

Polynomial random_poly(int nvars, int deg, std::mt19937_64& rng, int nterms = 8) {
    const auto basis = monomial_basis(nvars, deg);
    std::uniform_int_distribution<size_t> pick(0, basis.size() - 1);
    std::uniform_real_distribution<double> coef(-2.0, 2.0);
    std::vector<Polynomial::Term> terms;
    for (int t = 0; t < nterms; ++t) terms.emplace_back(basis[pick(rng)], coef(rng));
    return Polynomial::from_terms(nvars, std::move(terms));
}

std::vector<double> random_point(int nvars, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> x(static_cast<size_t>(nvars));
    for (auto& v : x) v = u(rng);
    return x;
}

}  // namespace

TEST_CASE("monomial basis counts and graded-lex order") {
    const auto b21 = monomial_basis(2, 1);
    REQUIRE(b21.size() == 3);
    CHECK(b21[0].exp == std::vector<int>{0, 0});  // 1
    CHECK(b21[1].exp == std::vector<int>{0, 1});  // x2
    CHECK(b21[2].exp == std::vector<int>{1, 0});  // x1

    CHECK(monomial_basis(2, 2).size() == 6);
    CHECK(monomial_basis(5, 3).size() == static_cast<size_t>(binom(5 + 3, 3)));  // 56

    // order strictly increasing under grlex
    const auto b = monomial_basis(3, 4);
    for (size_t i = 1; i < b.size(); ++i) CHECK(GrlexLess{}(b[i - 1], b[i]));
}

TEST_CASE("arithmetic basics") {
    const auto x1 = Polynomial::variable(2, 0);
    const auto x2 = Polynomial::variable(2, 1);

    CHECK((x1 + x1 * -1.0).is_zero());
    const auto prod = (x1 + Polynomial::constant(2, 1.0)) * (x1 - Polynomial::constant(2, 1.0));
    CHECK(prod == x1 * x1 - Polynomial::constant(2, 1.0));
    CHECK((x1 * x2 * 2.0) * 0.5 == x1 * x2);

    CHECK_THROWS_AS(x1 + Polynomial::variable(3, 0), std::invalid_argument);
}

TEST_CASE("evaluation against product identity") {
    std::mt19937_64 rng(42);
    for (int rep = 0; rep < 20; ++rep) {
        const auto a = random_poly(3, 3, rng);
        const auto b = random_poly(3, 3, rng);
        const auto ab = a * b;
        for (int k = 0; k < 10; ++k) {
            const auto x = random_point(3, rng);
            const double lhs = ab(x);
            const double rhs = a(x) * b(x);
            CHECK(std::abs(lhs - rhs) <= 1e-12 * (1.0 + std::abs(rhs)));
        }
    }
}

TEST_CASE("derivative examples and finite-difference oracle") {
    const auto x1 = Polynomial::variable(2, 0);
    const auto x2 = Polynomial::variable(2, 1);
    CHECK((x1 * x1 * x2).derivative(0) == x1 * x2 * 2.0);
    CHECK((x1 * x1 * x1).derivative(1).is_zero());

    std::mt19937_64 rng(7);
    const auto p = random_poly(3, 5, rng, 12);
    const double h = 1e-5;
    for (int k = 0; k < 100; ++k) {
        auto x = random_point(3, rng);
        for (int v = 0; v < 3; ++v) {
            auto xp = x, xm = x;
            xp[static_cast<size_t>(v)] += h;
            xm[static_cast<size_t>(v)] -= h;
            const double fd = (p(xp) - p(xm)) / (2 * h);
            const double ex = p.derivative(v)(x);
            CHECK(std::abs(fd - ex) <= 1e-6 * (1.0 + std::abs(ex)));
        }
    }
}

TEST_CASE("lie derivative") {
    // B = x1^2, f = (x2, -x1) -> 2 x1 x2
    const auto x1 = Polynomial::variable(2, 0);
    const auto x2 = Polynomial::variable(2, 1);
    std::vector<Polynomial> f{x2, x1 * -1.0};
    CHECK(lie_derivative(x1 * x1, f) == x1 * x2 * 2.0);
    CHECK(lie_derivative(Polynomial::constant(2, 3.0), f).is_zero());

    // swing row of the frequency-response model with H=2: the dw*dPm
    // coefficient of L_f(dw^2) is 2 * (0.5/2) = 0.5
    // vars (dw, dPm, dPv) + disturbance d appended in the field
    const int nv = 4;
    const double H = 2.0, R_inv = 30.0, tau_G = 0.1, tau_T = 0.5;
    const auto dw = Polynomial::variable(nv, 0);
    const auto pm = Polynomial::variable(nv, 1);
    const auto pv = Polynomial::variable(nv, 2);
    const auto d = Polynomial::variable(nv, 3);
    std::vector<Polynomial> sfr{(pm - d) * (0.5 / H), (pv - pm) * (1.0 / tau_T),
                                (dw * -R_inv - pv) * (1.0 / tau_G)};
    const auto B = Polynomial::variable(3, 0) * Polynomial::variable(3, 0);
    const auto L = lie_derivative(B, sfr);
    Monomial m({1, 1, 0, 0});
    CHECK(L.coefficient(m) == Catch::Approx(0.5));

    // linearity in B, coefficientwise
    std::mt19937_64 rng(3);
    const auto B1 = random_poly(2, 4, rng);
    const auto B2 = random_poly(2, 4, rng);
    const auto lhs = lie_derivative(B1 * 1.5 + B2 * -2.0, f);
    const auto rhs = lie_derivative(B1, f) * 1.5 + lie_derivative(B2, f) * -2.0;
    CHECK(lhs == rhs);
}

TEST_CASE("affine composition") {
    const auto x = Polynomial::variable(1, 0);
    Eigen::MatrixXd I = Eigen::MatrixXd::Identity(1, 1);
    CHECK(affine_compose(x, I, Eigen::VectorXd::Zero(1)) == x);

    // p = x^2 under x -> 2y + 1 gives 4y^2 + 4y + 1
    Eigen::MatrixXd A2 = 2.0 * I;
    Eigen::VectorXd b1(1);
    b1 << 1.0;
    const auto q = affine_compose(x * x, A2, b1);
    CHECK(q.coefficient(Monomial({2})) == Catch::Approx(4.0));
    CHECK(q.coefficient(Monomial({1})) == Catch::Approx(4.0));
    CHECK(q.coefficient(Monomial({0})) == Catch::Approx(1.0));

    // round trip with the inverse map recovers coefficients
    std::mt19937_64 rng(11);
    const auto p = random_poly(3, 4, rng, 10);
    Eigen::MatrixXd A(3, 3);
    A << 1.5, 0.2, 0.0, -0.3, 2.0, 0.1, 0.0, 0.4, 0.8;
    Eigen::VectorXd b(3);
    b << 0.1, -0.7, 0.3;
    const auto comp = affine_compose(p, A, b);
    CHECK(comp.degree() == p.degree());
    const Eigen::MatrixXd Ai = A.inverse();
    const auto back = affine_compose(comp, Ai, -Ai * b);
    const auto diff = back - p;
    for (const auto& [m, c] : diff.terms()) CHECK(std::abs(c) <= 1e-10);

    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(3, 3);
    CHECK_THROWS_AS(affine_compose(p, S, b), std::invalid_argument);
}

TEST_CASE("box moments") {
    const Box sym({-1.0, -1.0}, {1.0, 1.0});
    CHECK(box_moments(sym, std::vector<Monomial>{Monomial({2, 0})})[0] == Catch::Approx(4.0 / 3.0));
    CHECK(box_moments(sym, std::vector<Monomial>{Monomial({0, 0})})[0] == Catch::Approx(sym.volume()));
    const Box unit({0.0, 0.0}, {1.0, 1.0});
    CHECK(box_moments(unit, std::vector<Monomial>{Monomial({1, 1})})[0] == Catch::Approx(0.25));

    // odd-in-any-variable monomials integrate to zero over symmetric boxes
    CHECK(box_moments(sym, std::vector<Monomial>{Monomial({1, 2})})[0] == Catch::Approx(0.0).margin(1e-15));
    // nonnegative even monomials have positive mass
    for (const auto& m : monomial_basis(2, 6)) {
        bool even = true;
        for (int e : m.exp) even = even && e % 2 == 0;
        if (even) CHECK(box_moments(sym, std::vector<Monomial>{m})[0] > 0.0);
    }
}

TEST_CASE("serialization round trip") {
    std::mt19937_64 rng(5);
    const auto p = random_poly(4, 6, rng, 15);
    const json j = poly_to_json(p, std::vector<std::string>{"dw", "dpm", "dpv", "dwr"});
    const auto q = poly_from_json(j);
    CHECK(p == q);
    CHECK(j.at("degree").get<int>() == p.degree());

    const Box b({-0.04, -0.2}, {0.01, 0.8}, {"dw", "dpm"}, {"pu", "pu"});
    const Box b2 = box_from_json(box_to_json(b));
    CHECK(b2.lower == b.lower);
    CHECK(b2.upper == b.upper);
    CHECK(b2.names == b.names);
}

TEST_CASE("degree cap") {
    const auto x = Polynomial::variable(1, 0);
    Polynomial p = Polynomial::constant(1, 1.0);
    for (int i = 0; i < 6; ++i) p = p * (x * x);  // degree 12
    CHECK(p.degree() == 12);
    CHECK_THROWS_AS(p * x, std::invalid_argument);
}
