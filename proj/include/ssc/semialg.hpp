#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ssc/poly.hpp"

namespace ssc {

/// Membership tolerance: boundary points count as members.
inline constexpr double kMembershipTol = 1e-12;

/// Basic closed semialgebraic set {x : g_j(x) >= 0 for all j}.
struct SemialgebraicSet {
    int nvars = 0;
    std::vector<Polynomial> inequalities;
    std::string label;

    SemialgebraicSet() = default;
    SemialgebraicSet(int nv, std::vector<Polynomial> gs, std::string lbl = {})
        : nvars(nv), inequalities(std::move(gs)), label(std::move(lbl)) {
        for (const auto& g : inequalities)
            if (g.nvars() != nvars) throw std::invalid_argument("SemialgebraicSet: inequality nvars mismatch");
    }
};

inline bool contains(const SemialgebraicSet& set, std::span<const double> point) {
    if (static_cast<int>(point.size()) != set.nvars)
        throw std::invalid_argument("contains: point dimension mismatch");
    for (const auto& g : set.inequalities)
        if (g(point) < -kMembershipTol) return false;
    return true;
}

/// One inequality (x_i - lo_i)(hi_i - x_i) >= 0 per dimension.
inline SemialgebraicSet make_box_set(const Box& box, std::string label = "box") {
    const int n = box.dim();
    std::vector<Polynomial> gs;
    gs.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const Polynomial xi = Polynomial::variable(n, i);
        gs.push_back((xi - Polynomial::constant(n, box.lower[static_cast<size_t>(i)])) *
                     (Polynomial::constant(n, box.upper[static_cast<size_t>(i)]) - xi));
    }
    return SemialgebraicSet(n, std::move(gs), std::move(label));
}

/// Safe/unsafe partition of the domain by frequency limits. Limits are stored
/// in per-unit deviation; the unsafe side may have one branch per violated
/// bound (unions are kept as lists, intersection-only sets).
struct SafetySplit {
    SemialgebraicSet safe;
    std::vector<SemialgebraicSet> unsafe;  // one branch per violated bound
    double freq_low_pu = -std::numeric_limits<double>::infinity();
    double freq_high_pu = std::numeric_limits<double>::infinity();
    int freq_var = 0;
};

/// Build the split from limits in Hz. A non-finite limit is one-sided: that
/// side is encoded by the domain box bound instead of a vacuous inequality.
inline SafetySplit safety_split(const Box& domain, int freq_var, double low_hz, double high_hz,
                                double nominal_hz) {
    const int n = domain.dim();
    if (freq_var < 0 || freq_var >= n) throw std::invalid_argument("safety_split: freq_var out of range");
    SafetySplit out;
    out.freq_var = freq_var;
    const bool has_low = std::isfinite(low_hz);
    const bool has_high = std::isfinite(high_hz);
    if (!has_low && !has_high) throw std::invalid_argument("safety_split: at least one limit required");
    const double lo_pu = has_low ? (low_hz - nominal_hz) / nominal_hz : domain.lower[static_cast<size_t>(freq_var)];
    const double hi_pu = has_high ? (high_hz - nominal_hz) / nominal_hz : domain.upper[static_cast<size_t>(freq_var)];
    if (!(lo_pu < hi_pu)) throw std::invalid_argument("safety_split: inverted limits");
    if (lo_pu < domain.lower[static_cast<size_t>(freq_var)] - kMembershipTol ||
        hi_pu > domain.upper[static_cast<size_t>(freq_var)] + kMembershipTol)
        throw std::invalid_argument("safety_split: limits outside the domain box");
    out.freq_low_pu = has_low ? lo_pu : -std::numeric_limits<double>::infinity();
    out.freq_high_pu = has_high ? hi_pu : std::numeric_limits<double>::infinity();

    const SemialgebraicSet dom = make_box_set(domain, "X");
    const Polynomial w = Polynomial::variable(n, freq_var);

    SemialgebraicSet safe = dom;
    safe.label = "X_S";
    if (has_low && has_high) {
        safe.inequalities.push_back((w - Polynomial::constant(n, lo_pu)) * (Polynomial::constant(n, hi_pu) - w));
    } else if (has_low) {
        safe.inequalities.push_back(w - Polynomial::constant(n, lo_pu));
    } else {
        safe.inequalities.push_back(Polynomial::constant(n, hi_pu) - w);
    }
    out.safe = std::move(safe);

    if (has_low) {
        SemialgebraicSet u = dom;
        u.label = "X_U_low";
        u.inequalities.push_back(Polynomial::constant(n, lo_pu) - w);
        out.unsafe.push_back(std::move(u));
    }
    if (has_high) {
        SemialgebraicSet u = dom;
        u.label = "X_U_high";
        u.inequalities.push_back(w - Polynomial::constant(n, hi_pu));
        out.unsafe.push_back(std::move(u));
    }
    return out;
}

enum class SampleStrategy : std::uint8_t { kUniform, kLowDiscrepancy, kGrid };

struct SampleResult {
    std::vector<std::vector<double>> points;
    double acceptance = 0.0;
};

class DegenerateSetError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

namespace detail {

/// Deterministic uniform doubles in [0,1): raw 53-bit mantissa from the
/// engine so results are identical across platforms.
inline double canonical_u01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double halton(std::uint64_t index, int base) {
    double f = 1.0, r = 0.0;
    while (index > 0) {
        f /= base;
        r += f * static_cast<double>(index % static_cast<std::uint64_t>(base));
        index /= static_cast<std::uint64_t>(base);
    }
    return r;
}

inline int nth_prime(int n) {
    static constexpr int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
    if (n < 0 || n >= static_cast<int>(std::size(primes))) throw std::invalid_argument("too many dimensions for halton");
    return primes[n];
}

}  // namespace detail

/// Rejection sampling of up to n points inside the set from the bounding box.
/// Deterministic for a fixed seed; acceptance below 1e-4 is degenerate.
inline SampleResult sample_set(const SemialgebraicSet& set, const Box& bounding, int n,
                               SampleStrategy strategy = SampleStrategy::kUniform, std::uint64_t seed = 0) {
    if (n < 1) throw std::invalid_argument("sample_set: n must be >= 1");
    const int d = bounding.dim();
    if (d != set.nvars) throw std::invalid_argument("sample_set: set/box dimension mismatch");

    SampleResult out;
    out.points.reserve(static_cast<size_t>(n));
    std::mt19937_64 rng(seed);

    std::int64_t proposals = 0;
    const std::int64_t min_proposals = 10000;

    std::vector<double> x(static_cast<size_t>(d));
    std::vector<int> grid_dims;
    std::vector<std::int64_t> grid_idx;
    std::int64_t grid_total = 0;
    if (strategy == SampleStrategy::kGrid) {
        const int per_axis = std::max(2, static_cast<int>(std::ceil(std::pow(static_cast<double>(n), 1.0 / d))));
        grid_dims.assign(static_cast<size_t>(d), per_axis);
        grid_total = 1;
        for (int i = 0; i < d; ++i) grid_total *= per_axis;
    }

    std::int64_t k = 0;
    while (static_cast<int>(out.points.size()) < n) {
        switch (strategy) {
            case SampleStrategy::kUniform:
                for (int i = 0; i < d; ++i)
                    x[static_cast<size_t>(i)] = bounding.lower[static_cast<size_t>(i)] +
                                                detail::canonical_u01(rng) * (bounding.upper[static_cast<size_t>(i)] -
                                                                              bounding.lower[static_cast<size_t>(i)]);
                break;
            case SampleStrategy::kLowDiscrepancy:
                for (int i = 0; i < d; ++i)
                    x[static_cast<size_t>(i)] =
                        bounding.lower[static_cast<size_t>(i)] +
                        detail::halton(static_cast<std::uint64_t>(k + 1 + static_cast<std::int64_t>(seed)), detail::nth_prime(i)) *
                            (bounding.upper[static_cast<size_t>(i)] - bounding.lower[static_cast<size_t>(i)]);
                break;
            case SampleStrategy::kGrid: {
                if (k >= grid_total) {
                    // grid exhausted; report what we have
                    out.acceptance = static_cast<double>(out.points.size()) / static_cast<double>(proposals);
                    if (out.points.empty()) throw DegenerateSetError("sample_set: no grid point inside set '" + set.label + "'");
                    return out;
                }
                std::int64_t rem = k;
                for (int i = 0; i < d; ++i) {
                    const int gi = grid_dims[static_cast<size_t>(i)];
                    const auto q = rem % gi;
                    rem /= gi;
                    x[static_cast<size_t>(i)] = bounding.lower[static_cast<size_t>(i)] +
                                                (static_cast<double>(q) + 0.5) / gi *
                                                    (bounding.upper[static_cast<size_t>(i)] - bounding.lower[static_cast<size_t>(i)]);
                }
                break;
            }
        }
        ++k;
        ++proposals;
        if (contains(set, x)) out.points.push_back(x);
        if (proposals >= min_proposals &&
            static_cast<double>(out.points.size()) / static_cast<double>(proposals) < 1e-4)
            throw DegenerateSetError("sample_set: acceptance below 1e-4 for set '" + set.label + "'");
    }
    out.acceptance = static_cast<double>(out.points.size()) / static_cast<double>(proposals);
    return out;
}

// ---- serialization -------------------------------------------------------

inline json set_to_json(const SemialgebraicSet& s, std::span<const std::string> names = {}) {
    json gs = json::array();
    for (const auto& g : s.inequalities) gs.push_back(poly_to_json(g, names));
    return json{{"nvars", s.nvars}, {"label", s.label}, {"inequalities", gs}};
}

inline SemialgebraicSet set_from_json(const json& j) {
    SemialgebraicSet s;
    s.nvars = j.at("nvars").get<int>();
    s.label = j.value("label", "");
    for (const auto& g : j.at("inequalities")) s.inequalities.push_back(poly_from_json(g));
    for (const auto& g : s.inequalities)
        if (g.nvars() != s.nvars) throw std::invalid_argument("set_from_json: nvars mismatch");
    return s;
}

}  // namespace ssc
