#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace ssc {

using json = nlohmann::json;

/// Hard cap on total degree; degree-6 certificates squared in Gram products
/// reach 12 and nothing legitimate goes beyond.
inline constexpr int kMaxTotalDegree = 12;

/// Exponent vector of a single monomial, one entry per ambient variable.
struct Monomial {
    std::vector<int> exp;

    Monomial() = default;
    explicit Monomial(std::vector<int> e) : exp(std::move(e)) {}
    static Monomial unit(int nvars) { return Monomial(std::vector<int>(nvars, 0)); }
    static Monomial variable(int nvars, int i) {
        Monomial m = unit(nvars);
        m.exp.at(static_cast<size_t>(i)) = 1;
        return m;
    }

    int nvars() const { return static_cast<int>(exp.size()); }
    int degree() const {
        int d = 0;
        for (int e : exp) d += e;
        return d;
    }

    Monomial operator*(const Monomial& o) const {
        if (exp.size() != o.exp.size()) throw std::invalid_argument("monomial nvars mismatch");
        Monomial r = *this;
        for (size_t i = 0; i < exp.size(); ++i) r.exp[i] += o.exp[i];
        return r;
    }

    bool operator==(const Monomial& o) const { return exp == o.exp; }
};

/// Graded lexicographic order: total degree first, then the exponent tuple.
struct GrlexLess {
    bool operator()(const Monomial& a, const Monomial& b) const {
        const int da = a.degree(), db = b.degree();
        if (da != db) return da < db;
        return a.exp < b.exp;
    }
};

/// All monomials in `nvars` variables of total degree <= maxdeg, graded-lex.
/// Count is C(nvars + maxdeg, maxdeg).
inline std::vector<Monomial> monomial_basis(int nvars, int maxdeg) {
    if (nvars < 1) throw std::invalid_argument("monomial_basis: nvars must be >= 1");
    if (maxdeg < 0) throw std::invalid_argument("monomial_basis: maxdeg must be >= 0");
    std::vector<Monomial> out;
    std::vector<int> e(static_cast<size_t>(nvars), 0);
    // enumerate exponents of each total degree in lex order
    auto rec = [&](auto&& self, int pos, int remaining) -> void {
        if (pos == nvars - 1) {
            e[static_cast<size_t>(pos)] = remaining;
            out.emplace_back(e);
            return;
        }
        for (int k = 0; k <= remaining; ++k) {
            e[static_cast<size_t>(pos)] = k;
            self(self, pos + 1, remaining - k);
        }
    };
    for (int d = 0; d <= maxdeg; ++d) rec(rec, 0, d);
    return out;
}

/// Sparse multivariate polynomial with real coefficients. Terms are kept in
/// graded-lex order with no stored zeros; all operations are exact double
/// arithmetic with term collection.
class Polynomial {
  public:
    using Term = std::pair<Monomial, double>;

    explicit Polynomial(int nvars) : nvars_(nvars) {
        if (nvars < 1) throw std::invalid_argument("Polynomial: nvars must be >= 1");
    }

    static Polynomial zero(int nvars) { return Polynomial(nvars); }

    static Polynomial constant(int nvars, double c) {
        Polynomial p(nvars);
        if (c != 0.0) p.terms_.emplace_back(Monomial::unit(nvars), c);
        return p;
    }

    static Polynomial variable(int nvars, int i) {
        if (i < 0 || i >= nvars) throw std::invalid_argument("Polynomial::variable: index out of range");
        Polynomial p(nvars);
        p.terms_.emplace_back(Monomial::variable(nvars, i), 1.0);
        return p;
    }

    static Polynomial from_monomial(Monomial m, double c) {
        Polynomial p(m.nvars());
        if (c != 0.0) p.terms_.emplace_back(std::move(m), c);
        return p;
    }

    static Polynomial from_terms(int nvars, std::vector<Term> terms) {
        std::map<Monomial, double, GrlexLess> acc;
        for (auto& [m, c] : terms) {
            if (m.nvars() != nvars) throw std::invalid_argument("Polynomial: term nvars mismatch");
            acc[m] += c;
        }
        Polynomial p(nvars);
        p.assign(acc);
        return p;
    }

    int nvars() const { return nvars_; }
    bool is_zero() const { return terms_.empty(); }
    const std::vector<Term>& terms() const { return terms_; }

    int degree() const {
        // grlex order puts the highest total degree last
        return terms_.empty() ? 0 : terms_.back().first.degree();
    }

    double coefficient(const Monomial& m) const {
        auto it = std::lower_bound(terms_.begin(), terms_.end(), m,
                                   [](const Term& t, const Monomial& k) { return GrlexLess{}(t.first, k); });
        if (it != terms_.end() && it->first == m) return it->second;
        return 0.0;
    }

    Polynomial& operator+=(const Polynomial& o) {
        check_same_vars(o);
        std::map<Monomial, double, GrlexLess> acc;
        for (const auto& [m, c] : terms_) acc[m] += c;
        for (const auto& [m, c] : o.terms_) acc[m] += c;
        assign(acc);
        return *this;
    }

    Polynomial& operator-=(const Polynomial& o) { return *this += o * -1.0; }

    Polynomial operator+(const Polynomial& o) const {
        Polynomial r = *this;
        r += o;
        return r;
    }

    Polynomial operator-(const Polynomial& o) const {
        Polynomial r = *this;
        r -= o;
        return r;
    }

    Polynomial operator-() const { return *this * -1.0; }

    Polynomial operator*(const Polynomial& o) const {
        check_same_vars(o);
        if (!terms_.empty() && !o.terms_.empty() &&
            terms_.back().first.degree() + o.terms_.back().first.degree() > kMaxTotalDegree)
            throw std::invalid_argument("Polynomial: product exceeds max supported total degree");
        std::map<Monomial, double, GrlexLess> acc;
        for (const auto& [ma, ca] : terms_)
            for (const auto& [mb, cb] : o.terms_) acc[ma * mb] += ca * cb;
        Polynomial r(nvars_);
        r.assign(acc);
        return r;
    }

    Polynomial operator*(double s) const {
        Polynomial r(nvars_);
        if (s == 0.0) return r;
        r.terms_ = terms_;
        for (auto& [m, c] : r.terms_) c *= s;
        return r;
    }

    friend Polynomial operator*(double s, const Polynomial& p) { return p * s; }

    /// Formal partial derivative with respect to variable `var`.
    Polynomial derivative(int var) const {
        if (var < 0 || var >= nvars_) throw std::invalid_argument("Polynomial::derivative: index out of range");
        std::map<Monomial, double, GrlexLess> acc;
        for (const auto& [m, c] : terms_) {
            const int e = m.exp[static_cast<size_t>(var)];
            if (e == 0) continue;
            Monomial d = m;
            d.exp[static_cast<size_t>(var)] = e - 1;
            acc[d] += c * e;
        }
        Polynomial r(nvars_);
        r.assign(acc);
        return r;
    }

    double operator()(std::span<const double> x) const {
        if (static_cast<int>(x.size()) != nvars_) throw std::invalid_argument("Polynomial eval: point dimension mismatch");
        // per-variable power table up to this polynomial's degree
        const int d = degree();
        std::vector<double> pw(static_cast<size_t>(nvars_) * (static_cast<size_t>(d) + 1));
        for (int i = 0; i < nvars_; ++i) {
            pw[static_cast<size_t>(i) * (d + 1)] = 1.0;
            for (int k = 1; k <= d; ++k)
                pw[static_cast<size_t>(i) * (d + 1) + k] = pw[static_cast<size_t>(i) * (d + 1) + k - 1] * x[static_cast<size_t>(i)];
        }
        double s = 0.0;
        for (const auto& [m, c] : terms_) {
            double t = c;
            for (int i = 0; i < nvars_; ++i) {
                const int e = m.exp[static_cast<size_t>(i)];
                if (e) t *= pw[static_cast<size_t>(i) * (d + 1) + e];
            }
            s += t;
        }
        return s;
    }

    double operator()(std::initializer_list<double> x) const {
        return (*this)(std::span<const double>(x.begin(), x.size()));
    }

    /// Extend to a wider variable space; existing variable i becomes var_map[i].
    Polynomial embed(int nvars_to, std::span<const int> var_map) const {
        if (static_cast<int>(var_map.size()) != nvars_) throw std::invalid_argument("embed: map size mismatch");
        std::map<Monomial, double, GrlexLess> acc;
        for (const auto& [m, c] : terms_) {
            Monomial e = Monomial::unit(nvars_to);
            for (int i = 0; i < nvars_; ++i) e.exp[static_cast<size_t>(var_map[static_cast<size_t>(i)])] += m.exp[static_cast<size_t>(i)];
            acc[e] += c;
        }
        Polynomial r(nvars_to);
        r.assign(acc);
        return r;
    }

    bool operator==(const Polynomial& o) const { return nvars_ == o.nvars_ && terms_ == o.terms_; }

    std::string str(std::span<const std::string> names = {}) const {
        if (terms_.empty()) return "0";
        std::ostringstream os;
        bool first = true;
        for (const auto& [m, c] : terms_) {
            if (!first) os << (c >= 0 ? " + " : " - ");
            else if (c < 0) os << "-";
            os << std::abs(c);
            for (int i = 0; i < nvars_; ++i) {
                const int e = m.exp[static_cast<size_t>(i)];
                if (!e) continue;
                os << "*";
                if (static_cast<size_t>(i) < names.size()) os << names[static_cast<size_t>(i)];
                else os << "x" << i;
                if (e > 1) os << "^" << e;
            }
            first = false;
        }
        return os.str();
    }

  private:
    void check_same_vars(const Polynomial& o) const {
        if (nvars_ != o.nvars_) throw std::invalid_argument("polynomial operands have different variable counts");
    }

    void assign(const std::map<Monomial, double, GrlexLess>& acc) {
        terms_.clear();
        terms_.reserve(acc.size());
        for (const auto& [m, c] : acc)
            if (c != 0.0) terms_.emplace_back(m, c);
    }

    int nvars_;
    std::vector<Term> terms_;
};

/// Lie derivative of B along the vector field f: sum_i dB/dx_i * f_i.
/// B lives on the first B.nvars() variables (the states); every f_i may use a
/// wider variable set that appends disturbances after the states.
inline Polynomial lie_derivative(const Polynomial& B, std::span<const Polynomial> f) {
    if (f.empty()) throw std::invalid_argument("lie_derivative: empty field");
    const int nf = f[0].nvars();
    if (B.nvars() > nf) throw std::invalid_argument("lie_derivative: B has more variables than the field");
    if (static_cast<int>(f.size()) != B.nvars())
        throw std::invalid_argument("lie_derivative: field length must equal the state count");
    std::vector<int> var_map(static_cast<size_t>(B.nvars()));
    for (int i = 0; i < B.nvars(); ++i) var_map[static_cast<size_t>(i)] = i;
    Polynomial acc(nf);
    for (size_t i = 0; i < f.size(); ++i) {
        if (f[i].nvars() != nf) throw std::invalid_argument("lie_derivative: field components disagree on nvars");
        const Polynomial dB = B.derivative(static_cast<int>(i)).embed(nf, var_map);
        acc += dB * f[i];
    }
    return acc;
}

/// q(y) = p(A y + b) for invertible square A. Total degree is preserved.
inline Polynomial affine_compose(const Polynomial& p, const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
    const int n = p.nvars();
    if (A.rows() != n || A.cols() != n || b.size() != n)
        throw std::invalid_argument("affine_compose: dimension mismatch");
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible()) throw std::invalid_argument("affine_compose: singular matrix");

    // linear replacement polynomial for each original variable
    std::vector<Polynomial> repl;
    repl.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        Polynomial li = Polynomial::constant(n, b(i));
        for (int j = 0; j < n; ++j)
            if (A(i, j) != 0.0) li += Polynomial::variable(n, j) * A(i, j);
        repl.push_back(li);
    }
    // power cache per variable
    const int dmax = p.degree();
    std::vector<std::vector<Polynomial>> pows(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        pows[static_cast<size_t>(i)].push_back(Polynomial::constant(n, 1.0));
        for (int k = 1; k <= dmax; ++k)
            pows[static_cast<size_t>(i)].push_back(pows[static_cast<size_t>(i)].back() * repl[static_cast<size_t>(i)]);
    }
    Polynomial out(n);
    for (const auto& [m, c] : p.terms()) {
        Polynomial t = Polynomial::constant(n, c);
        for (int i = 0; i < n; ++i) {
            const int e = m.exp[static_cast<size_t>(i)];
            if (e) t = t * pows[static_cast<size_t>(i)][static_cast<size_t>(e)];
        }
        out += t;
    }
    return out;
}

/// Axis-aligned box with optional per-axis names and units kept as metadata.
struct Box {
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<std::string> names;  // optional
    std::vector<std::string> units;  // optional

    Box() = default;
    Box(std::vector<double> lo, std::vector<double> hi, std::vector<std::string> nm = {},
        std::vector<std::string> un = {})
        : lower(std::move(lo)), upper(std::move(hi)), names(std::move(nm)), units(std::move(un)) {
        validate();
    }

    int dim() const { return static_cast<int>(lower.size()); }

    void validate() const {
        if (lower.size() != upper.size()) throw std::invalid_argument("Box: bound size mismatch");
        if (lower.empty()) throw std::invalid_argument("Box: empty");
        for (size_t i = 0; i < lower.size(); ++i)
            if (!(lower[i] < upper[i])) throw std::invalid_argument("Box: lower must be < upper");
        if (!names.empty() && names.size() != lower.size()) throw std::invalid_argument("Box: names size mismatch");
        if (!units.empty() && units.size() != lower.size()) throw std::invalid_argument("Box: units size mismatch");
    }

    double center(int i) const { return 0.5 * (lower[static_cast<size_t>(i)] + upper[static_cast<size_t>(i)]); }
    double halfwidth(int i) const { return 0.5 * (upper[static_cast<size_t>(i)] - lower[static_cast<size_t>(i)]); }

    bool contains(std::span<const double> x, double tol = 0.0) const {
        if (static_cast<int>(x.size()) != dim()) throw std::invalid_argument("Box::contains: dimension mismatch");
        for (size_t i = 0; i < lower.size(); ++i)
            if (x[i] < lower[i] - tol || x[i] > upper[i] + tol) return false;
        return true;
    }

    double volume() const {
        double v = 1.0;
        for (size_t i = 0; i < lower.size(); ++i) v *= upper[i] - lower[i];
        return v;
    }
};

/// Exact Lebesgue integrals of the basis monomials over the box:
/// for x^a the entry is prod_i (hi^(a_i+1) - lo^(a_i+1)) / (a_i+1).
inline std::vector<double> box_moments(const Box& box, std::span<const Monomial> basis) {
    std::vector<double> out;
    out.reserve(basis.size());
    for (const auto& m : basis) {
        if (m.nvars() != box.dim()) throw std::invalid_argument("box_moments: dimension mismatch");
        double v = 1.0;
        for (int i = 0; i < box.dim(); ++i) {
            const int e = m.exp[static_cast<size_t>(i)];
            v *= (std::pow(box.upper[static_cast<size_t>(i)], e + 1) - std::pow(box.lower[static_cast<size_t>(i)], e + 1)) /
                 (e + 1);
        }
        out.push_back(v);
    }
    return out;
}

// ---- serialization -------------------------------------------------------

inline json poly_to_json(const Polynomial& p, std::span<const std::string> names = {}) {
    json terms = json::array();
    for (const auto& [m, c] : p.terms()) terms.push_back(json::array({m.exp, c}));
    json j{{"nvars", p.nvars()}, {"degree", p.degree()}, {"terms", terms}};
    if (!names.empty()) j["vars"] = std::vector<std::string>(names.begin(), names.end());
    return j;
}

inline Polynomial poly_from_json(const json& j) {
    const int nvars = j.at("nvars").get<int>();
    std::vector<Polynomial::Term> terms;
    for (const auto& t : j.at("terms")) {
        terms.emplace_back(Monomial(t.at(0).get<std::vector<int>>()), t.at(1).get<double>());
    }
    return Polynomial::from_terms(nvars, std::move(terms));
}

inline json box_to_json(const Box& b) {
    json j{{"lower", b.lower}, {"upper", b.upper}};
    if (!b.names.empty()) j["names"] = b.names;
    if (!b.units.empty()) j["units"] = b.units;
    return j;
}

inline Box box_from_json(const json& j) {
    Box b;
    b.lower = j.at("lower").get<std::vector<double>>();
    b.upper = j.at("upper").get<std::vector<double>>();
    if (j.contains("names")) b.names = j.at("names").get<std::vector<std::string>>();
    if (j.contains("units")) b.units = j.at("units").get<std::vector<std::string>>();
    b.validate();
    return b;
}

}  // namespace ssc
