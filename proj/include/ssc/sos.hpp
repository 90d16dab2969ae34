#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ssc/poly.hpp"
#include "ssc/semialg.hpp"

namespace ssc {

/// Unknown polynomial with free coefficients over a fixed monomial basis.
struct UnknownPoly {
    std::string name;
    int nvars = 0;
    int degree = 0;
    std::vector<Monomial> basis;  // graded-lex

    static UnknownPoly make(std::string name, int nvars, int degree) {
        UnknownPoly u;
        u.name = std::move(name);
        u.nvars = nvars;
        u.degree = degree;
        u.basis = monomial_basis(nvars, degree);
        return u;
    }
};

/// Putinar multiplier: an unknown SOS polynomial sigma paired with a known
/// set polynomial g; the constraint subtracts sigma*g.
struct SosMultiplier {
    Polynomial g;
    int sigma_degree = 0;  // even
    std::vector<Monomial> half_basis;
};

/// One SOS membership constraint:
///   constant + sum_u sum_k coeff_u[k] * contribution[u][k]
///     - sum_j sigma_j g_j  ∈ Σ²  (witnessed by the constraint's own Gram)
struct SosConstraint {
    std::string name;
    int nvars = 0;
    int degree = 0;  // even
    Polynomial constant_part{1};
    /// contribution[u][k]: polynomial multiplying coefficient k of unknown u;
    /// empty vector means the unknown does not enter this constraint.
    std::vector<std::vector<Polynomial>> contributions;
    std::vector<SosMultiplier> multipliers;
    std::vector<Monomial> own_half_basis;
    std::vector<Monomial> rows;  // coefficient-matching monomials

    void finalize() {
        if (degree % 2 != 0) throw std::invalid_argument("SosConstraint '" + name + "': degree must be even");
        own_half_basis = monomial_basis(nvars, degree / 2);
        rows = monomial_basis(nvars, degree);
        for (auto& m : multipliers) {
            int ds = degree - m.g.degree();
            if (ds < 0) throw std::invalid_argument("SosConstraint '" + name + "': set polynomial degree exceeds constraint");
            ds -= ds % 2;
            m.sigma_degree = ds;
            m.half_basis = monomial_basis(nvars, ds / 2);
        }
    }
};

/// The assembled program: unknowns shared across constraints, one linear
/// objective over a single unknown's coefficients.
struct SosProgram {
    std::vector<UnknownPoly> unknowns;
    std::vector<SosConstraint> constraints;
    int objective_unknown = -1;
};

struct RosProgramOptions {
    int deg_B = 6;
    int deg_Omega = 6;
    double epsilon = 1e-3;
};

/// Assembles the largest-ROS program: minimize the Lebesgue mass of Omega
/// subject to
///   (b) B - eps - sum sigma g_U                    SOS   (one per unsafe branch)
///   (c) -dB/dx f_on - sigma g_D - sigma g_X        SOS   (over states x disturbance)
///   (d) Omega - B - 1 - sigma g_X                  SOS
///   (e) Omega - sigma g_X                          SOS
/// States are variables 0..ns-1 of f_on; disturbances follow. Passing an
/// empty `D` means f_on is already restricted to a fixed disturbance and
/// constraint (c) lives over the states alone.
inline SosProgram build_ros_program(std::span<const Polynomial> f_on, const SemialgebraicSet& X,
                                    std::span<const SemialgebraicSet> unsafe_branches,
                                    const std::optional<SemialgebraicSet>& D, const RosProgramOptions& opts) {
    if (f_on.empty()) throw std::invalid_argument("build_ros_program: empty field");
    if (unsafe_branches.empty()) throw std::invalid_argument("build_ros_program: no unsafe set");
    if (opts.deg_B % 2 != 0 || opts.deg_Omega % 2 != 0)
        throw std::invalid_argument("build_ros_program: degrees must be even");
    if (!(opts.epsilon > 0.0)) throw std::invalid_argument("build_ros_program: epsilon must be positive");

    const int ns = static_cast<int>(f_on.size());
    const int nv = f_on[0].nvars();
    const int nd = nv - ns;
    if (nd < 0) throw std::invalid_argument("build_ros_program: field has fewer variables than states");
    if (X.nvars != ns) throw std::invalid_argument("build_ros_program: X must live on the states");
    if (D && D->nvars != nd) throw std::invalid_argument("build_ros_program: D dimension mismatch");
    if (!D && nd != 0)
        throw std::invalid_argument("build_ros_program: field has disturbance variables but no D given");

    SosProgram prog;
    prog.unknowns.push_back(UnknownPoly::make("B", ns, opts.deg_B));
    prog.unknowns.push_back(UnknownPoly::make("Omega", ns, opts.deg_Omega));
    prog.objective_unknown = 1;
    const auto& basB = prog.unknowns[0].basis;
    const auto& basO = prog.unknowns[1].basis;

    auto embed_states = [&](const Polynomial& p) {
        if (nd == 0) return p;
        std::vector<int> map(static_cast<size_t>(ns));
        for (int i = 0; i < ns; ++i) map[static_cast<size_t>(i)] = i;
        return p.embed(nv, map);
    };
    auto embed_dist = [&](const Polynomial& p) {
        std::vector<int> map(static_cast<size_t>(nd));
        for (int i = 0; i < nd; ++i) map[static_cast<size_t>(i)] = ns + i;
        return p.embed(nv, map);
    };

    // (b) one constraint per unsafe branch, sharing B
    int branch_no = 0;
    for (const auto& U : unsafe_branches) {
        if (U.nvars != ns) throw std::invalid_argument("build_ros_program: unsafe set must live on the states");
        if (U.inequalities.empty()) throw std::invalid_argument("build_ros_program: empty unsafe set description");
        SosConstraint c;
        c.name = "unsafe_positivity_" + std::to_string(branch_no++);
        c.nvars = ns;
        c.degree = opts.deg_B;
        c.constant_part = Polynomial::constant(ns, -opts.epsilon);
        c.contributions.resize(prog.unknowns.size());
        c.contributions[0].reserve(basB.size());
        for (const auto& m : basB) c.contributions[0].push_back(Polynomial::from_monomial(m, 1.0));
        for (const auto& g : U.inequalities) c.multipliers.push_back({g, 0, {}});
        c.finalize();
        prog.constraints.push_back(std::move(c));
    }

    // (c) decrease along the field over X (x D)
    {
        SosConstraint c;
        c.name = "lie_decrease";
        c.nvars = nv;
        int lie_deg = 0;
        c.contributions.resize(prog.unknowns.size());
        c.contributions[0].reserve(basB.size());
        for (const auto& m : basB) {
            const Polynomial lie = lie_derivative(Polynomial::from_monomial(m, 1.0), f_on);
            lie_deg = std::max(lie_deg, lie.degree());
            c.contributions[0].push_back(lie * -1.0);
        }
        c.degree = std::max(opts.deg_B, lie_deg);
        if (c.degree % 2 != 0) ++c.degree;
        c.constant_part = Polynomial::zero(nv);
        if (D)
            for (const auto& g : D->inequalities) c.multipliers.push_back({embed_dist(g), 0, {}});
        for (const auto& g : X.inequalities) c.multipliers.push_back({embed_states(g), 0, {}});
        c.finalize();
        prog.constraints.push_back(std::move(c));
    }

    // (d) Omega - B - 1 >= 0 on X
    {
        SosConstraint c;
        c.name = "omega_dominates";
        c.nvars = ns;
        c.degree = std::max(opts.deg_B, opts.deg_Omega);
        c.constant_part = Polynomial::constant(ns, -1.0);
        c.contributions.resize(prog.unknowns.size());
        for (const auto& m : basB) c.contributions[0].push_back(Polynomial::from_monomial(m, -1.0));
        for (const auto& m : basO) c.contributions[1].push_back(Polynomial::from_monomial(m, 1.0));
        for (const auto& g : X.inequalities) c.multipliers.push_back({g, 0, {}});
        c.finalize();
        prog.constraints.push_back(std::move(c));
    }

    // (e) Omega >= 0 on X
    {
        SosConstraint c;
        c.name = "omega_nonnegative";
        c.nvars = ns;
        c.degree = opts.deg_Omega;
        c.constant_part = Polynomial::zero(ns);
        c.contributions.resize(prog.unknowns.size());
        for (const auto& m : basO) c.contributions[1].push_back(Polynomial::from_monomial(m, 1.0));
        for (const auto& g : X.inequalities) c.multipliers.push_back({g, 0, {}});
        c.finalize();
        prog.constraints.push_back(std::move(c));
    }
    return prog;
}

// ---- reduction to a standard-form SDP --------------------------------------

struct SdpEntry {
    int row = 0;
    int col = 0;
    double val = 0.0;
};

/// min c'v  s.t.  A v = b,  v = (free vars, svec of PSD blocks).
/// svec stores the upper triangle column-major with off-diagonals * sqrt(2).
struct SdpProblem {
    int n_free = 0;
    std::vector<int> psd_dims;
    int n_rows = 0;
    std::vector<SdpEntry> entries;
    std::vector<double> rhs;
    std::vector<double> objective;  // size n_vars(); nonzero only on free part

    int n_vars() const {
        int n = n_free;
        for (int d : psd_dims) n += d * (d + 1) / 2;
        return n;
    }
    int block_offset(int b) const {
        int off = n_free;
        for (int i = 0; i < b; ++i) off += psd_dims[static_cast<size_t>(i)] * (psd_dims[static_cast<size_t>(i)] + 1) / 2;
        return off;
    }
};

inline int svec_size(int n) { return n * (n + 1) / 2; }

/// index of (i,j), i<=j, in the column-major upper-triangle layout
inline int svec_index(int i, int j) { return j * (j + 1) / 2 + i; }

inline constexpr double kSqrt2 = 1.4142135623730951;

/// Gram blocks and coefficient-matching rows of a single constraint, with a
/// local layout: columns [0, n_unknown_coeffs) are the program's unknown
/// coefficients (in program order), followed by svec entries of each block
/// (multipliers in order, own Gram last).
struct GramParameterization {
    std::vector<int> block_dims;
    int n_rows = 0;
    int n_unknown_cols = 0;
    std::vector<SdpEntry> entries;
    std::vector<double> rhs;
};

inline GramParameterization gram_parameterize(const SosConstraint& c, std::span<const UnknownPoly> unknowns) {
    GramParameterization out;
    out.n_rows = static_cast<int>(c.rows.size());
    std::map<Monomial, int, GrlexLess> row_of;
    for (int r = 0; r < out.n_rows; ++r) row_of[c.rows[static_cast<size_t>(r)]] = r;

    // unknown-coefficient columns, program order
    std::vector<int> u_off(unknowns.size());
    int ncols = 0;
    for (size_t u = 0; u < unknowns.size(); ++u) {
        u_off[u] = ncols;
        ncols += static_cast<int>(unknowns[u].basis.size());
    }
    out.n_unknown_cols = ncols;

    std::vector<int> var_map_states;  // embed unknown polys into constraint vars
    for (size_t u = 0; u < unknowns.size() && u < c.contributions.size(); ++u) {
        const auto& contrib = c.contributions[u];
        if (contrib.empty()) continue;
        if (static_cast<int>(contrib.size()) != static_cast<int>(unknowns[u].basis.size()))
            throw std::invalid_argument("gram_parameterize: contribution size mismatch for " + unknowns[u].name);
        for (size_t k = 0; k < contrib.size(); ++k) {
            for (const auto& [m, v] : contrib[k].terms()) {
                auto it = row_of.find(m);
                if (it == row_of.end())
                    throw std::invalid_argument("gram_parameterize: contribution exceeds constraint degree in " + c.name);
                out.entries.push_back({it->second, u_off[u] + static_cast<int>(k), v});
            }
        }
    }

    // multiplier Grams (negative sign), then the constraint's own Gram
    auto add_gram = [&](std::span<const Monomial> half, const Polynomial* g, double sign) {
        const int dim = static_cast<int>(half.size());
        out.block_dims.push_back(dim);
        const int off = ncols;
        ncols += svec_size(dim);
        for (int j = 0; j < dim; ++j) {
            for (int i = 0; i <= j; ++i) {
                const Monomial prod = half[static_cast<size_t>(i)] * half[static_cast<size_t>(j)];
                const double pair_w = (i == j) ? 1.0 : kSqrt2;  // svec entry to ordered-pair sum
                const int col = off + svec_index(i, j);
                if (g == nullptr) {
                    auto it = row_of.find(prod);
                    if (it == row_of.end()) throw std::invalid_argument("gram_parameterize: basis exceeds rows");
                    out.entries.push_back({it->second, col, sign * pair_w});
                } else {
                    for (const auto& [gm, gv] : g->terms()) {
                        auto it = row_of.find(prod * gm);
                        if (it == row_of.end()) throw std::invalid_argument("gram_parameterize: multiplier exceeds rows");
                        out.entries.push_back({it->second, col, sign * pair_w * gv});
                    }
                }
            }
        }
    };
    for (const auto& m : c.multipliers) add_gram(m.half_basis, &m.g, -1.0);
    add_gram(c.own_half_basis, nullptr, +1.0);

    out.rhs.assign(static_cast<size_t>(out.n_rows), 0.0);
    for (const auto& [m, v] : c.constant_part.terms()) {
        auto it = row_of.find(m);
        if (it == row_of.end()) throw std::invalid_argument("gram_parameterize: constant exceeds constraint degree");
        out.rhs[static_cast<size_t>(it->second)] = -v;
    }
    return out;
}

/// Reduce the program to one standard-form SDP. `l` must be indexed by the
/// objective unknown's monomial basis.
inline SdpProblem to_sdp(const SosProgram& prog, std::span<const double> l) {
    if (prog.objective_unknown >= static_cast<int>(prog.unknowns.size()))
        throw std::invalid_argument("to_sdp: bad objective unknown");
    if (prog.objective_unknown >= 0) {
        const auto& obj_u = prog.unknowns[static_cast<size_t>(prog.objective_unknown)];
        if (l.size() != obj_u.basis.size())
            throw std::invalid_argument("to_sdp: moment vector length does not match the objective basis");
    } else if (!l.empty()) {
        throw std::invalid_argument("to_sdp: moment vector given for a feasibility program");
    }

    SdpProblem sdp;
    std::vector<int> u_off(prog.unknowns.size());
    for (size_t u = 0; u < prog.unknowns.size(); ++u) {
        u_off[u] = sdp.n_free;
        sdp.n_free += static_cast<int>(prog.unknowns[u].basis.size());
    }

    int row0 = 0;
    int col0 = sdp.n_free;
    for (const auto& c : prog.constraints) {
        GramParameterization gp = gram_parameterize(c, prog.unknowns);
        for (const auto& e : gp.entries) {
            const int col = e.col < gp.n_unknown_cols ? e.col  // unknown layout equals global free layout
                                                      : col0 + (e.col - gp.n_unknown_cols);
            sdp.entries.push_back({row0 + e.row, col, e.val});
        }
        for (int d : gp.block_dims) {
            sdp.psd_dims.push_back(d);
            col0 += svec_size(d);
        }
        sdp.rhs.insert(sdp.rhs.end(), gp.rhs.begin(), gp.rhs.end());
        row0 += gp.n_rows;
    }
    sdp.n_rows = row0;
    sdp.objective.assign(static_cast<size_t>(sdp.n_vars()), 0.0);
    if (prog.objective_unknown >= 0)
        for (size_t k = 0; k < l.size(); ++k)
            sdp.objective[static_cast<size_t>(u_off[static_cast<size_t>(prog.objective_unknown)]) + k] = l[k];
    return sdp;
}

/// Offset of an unknown's coefficients inside the SDP free-variable block.
inline int unknown_offset(const SosProgram& prog, int unknown) {
    int off = 0;
    for (int u = 0; u < unknown; ++u) off += static_cast<int>(prog.unknowns[static_cast<size_t>(u)].basis.size());
    return off;
}

// ---- sparse text interchange ----------------------------------------------

inline void write_sdp(std::ostream& os, const SdpProblem& p) {
    os.precision(17);
    os << "ssc-sdp 1\n";
    os << "free " << p.n_free << "\n";
    os << "blocks " << p.psd_dims.size();
    for (int d : p.psd_dims) os << " " << d;
    os << "\n";
    os << "rows " << p.n_rows << "\n";
    int obj_nnz = 0;
    for (double v : p.objective)
        if (v != 0.0) ++obj_nnz;
    os << "objective " << obj_nnz << "\n";
    for (size_t i = 0; i < p.objective.size(); ++i)
        if (p.objective[i] != 0.0) os << "o " << i << " " << p.objective[i] << "\n";
    os << "entries " << p.entries.size() << "\n";
    for (const auto& e : p.entries) os << "a " << e.row << " " << e.col << " " << e.val << "\n";
    int rhs_nnz = 0;
    for (double v : p.rhs)
        if (v != 0.0) ++rhs_nnz;
    os << "rhs " << rhs_nnz << "\n";
    for (size_t i = 0; i < p.rhs.size(); ++i)
        if (p.rhs[i] != 0.0) os << "b " << i << " " << p.rhs[i] << "\n";
}

inline SdpProblem read_sdp(std::istream& is) {
    SdpProblem p;
    std::string tok;
    int version = 0;
    is >> tok >> version;
    if (tok != "ssc-sdp" || version != 1) throw std::runtime_error("read_sdp: bad header");
    int nblocks = 0, nobj = 0, nent = 0, nrhs = 0;
    while (is >> tok) {
        if (tok == "free") is >> p.n_free;
        else if (tok == "blocks") {
            is >> nblocks;
            p.psd_dims.resize(static_cast<size_t>(nblocks));
            for (auto& d : p.psd_dims) is >> d;
        } else if (tok == "rows") {
            is >> p.n_rows;
            p.rhs.assign(static_cast<size_t>(p.n_rows), 0.0);
        } else if (tok == "objective") {
            is >> nobj;
            p.objective.assign(static_cast<size_t>(p.n_vars()), 0.0);
        } else if (tok == "o") {
            size_t i;
            double v;
            is >> i >> v;
            p.objective.at(i) = v;
        } else if (tok == "entries") is >> nent;
        else if (tok == "a") {
            SdpEntry e;
            is >> e.row >> e.col >> e.val;
            p.entries.push_back(e);
        } else if (tok == "rhs") is >> nrhs;
        else if (tok == "b") {
            size_t i;
            double v;
            is >> i >> v;
            p.rhs.at(i) = v;
        } else throw std::runtime_error("read_sdp: unexpected token '" + tok + "'");
    }
    if (static_cast<int>(p.entries.size()) != nent) throw std::runtime_error("read_sdp: truncated entries");
    return p;
}

}  // namespace ssc
