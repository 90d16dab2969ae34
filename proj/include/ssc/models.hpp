#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "ssc/poly.hpp"

namespace ssc {

inline bool is_hurwitz(const Eigen::MatrixXd& A, double margin = 0.0) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(A, /*computeEigenvectors=*/false);
    for (int i = 0; i < A.rows(); ++i)
        if (es.eigenvalues()(i).real() >= -margin) return false;
    return true;
}

/// Reduced system-frequency-response parameters (swing + turbine + governor).
struct SfrParams {
    double H = 0.0;       // inertia constant, s
    double R = 0.0;       // governor droop, pu
    double tau_T = 0.0;   // turbine time constant, s
    double tau_G = 0.0;   // governor time constant, s
    double k_scal = 0.0;  // WTG-to-SG base change ratio

    void validate() const {
        if (!(H > 0.0 && R > 0.0 && tau_T > 0.0 && tau_G > 0.0 && k_scal >= 0.0))
            throw std::invalid_argument("SfrParams: H, R, tau_T, tau_G must be positive and k_scal >= 0");
    }
};

struct SfrField {
    Eigen::Matrix3d A;
    Eigen::Vector3d B;  // multiplies (k_scal*dPg - dPd)
};

/// State order [dw, dPm, dPv]:
///   dw'  = dPm/(2H) + (k_scal dPg - dPd)/(2H)
///   dPm' = (dPv - dPm)/tau_T
///   dPv' = (-dw/R - dPv)/tau_G     (stable governor sign)
/// Throws if the unforced matrix is not Hurwitz.
inline SfrField sfr_field(const SfrParams& p) {
    p.validate();
    SfrField f;
    f.A << 0.0, 0.5 / p.H, 0.0,
           0.0, -1.0 / p.tau_T, 1.0 / p.tau_T,
           -1.0 / (p.R * p.tau_G), 0.0, -1.0 / p.tau_G;
    f.B << 0.5 / p.H, 0.0, 0.0;
    if (!is_hurwitz(f.A)) throw std::invalid_argument("sfr_field: parameters give an unstable frequency response");
    return f;
}

/// Linear WTG support-response model: x' = A x + B u, dPg = C x + D u with
/// input u = k_ie * (measured RoCoF signal).
struct WtgLinearParams {
    Eigen::MatrixXd A;
    Eigen::VectorXd B;
    Eigen::RowVectorXd C;
    double D = 0.0;
    double k_ie = 0.0;
    std::vector<std::string> state_names;

    int nstates() const { return static_cast<int>(A.rows()); }

    void validate() const {
        if (A.rows() != A.cols() || B.size() != A.rows() || C.size() != A.rows())
            throw std::invalid_argument("WtgLinearParams: inconsistent dimensions");
        if (!is_hurwitz(A)) throw std::invalid_argument("WtgLinearParams: A is not Hurwitz");
    }
};

/// How the runtime RoCoF measurement maps onto the support-model input.
/// `scale` converts the per-unit frequency derivative into the signal the
/// model was identified against; `sign` fixes the injection direction so
/// support is positive under falling frequency.
struct IeSignalConvention {
    double scale = 1.0;
    double sign = 1.0;

    double factor() const { return scale * sign; }
};

inline WtgLinearParams apply_ie_convention(WtgLinearParams w, const IeSignalConvention& conv) {
    w.B *= conv.factor();
    w.D *= conv.factor();
    return w;
}

/// Generic type-3 torque-control model parameters around a fixed operating
/// point. T_sp and T_pc are recorded but unused after the fast/slow-loop
/// simplifications.
struct WtgGenericParams {
    double K_ptrq = 0.0;
    double K_itrq = 0.0;
    double T_sp = 0.0;
    double T_pc = 0.0;
    double H_w_bar = 0.0;
    double omega_ref_bar = 0.0;
    double P_m_w_bar = 0.0;

    void validate() const {
        if (!(K_ptrq > 0.0 && K_itrq > 0.0 && H_w_bar > 0.0 && omega_ref_bar > 0.0 && P_m_w_bar > 0.0))
            throw std::invalid_argument("WtgGenericParams: gains, inertia and operating point must be positive");
    }
};

/// Nonlinear right-hand side of the torque-control model, states (x, w_r):
///   x'   = K_i (w_r - w_ref + u)
///   w_r' = (P_m - w_r * y) / (2 H_w w_r),  y = x + K_p (w_r - w_ref + u)
/// Output P_G = w_r * y.
inline Eigen::Vector2d wtg_generic_rhs(const WtgGenericParams& p, double x, double wr, double u) {
    const double err = wr - p.omega_ref_bar + u;
    const double y = x + p.K_ptrq * err;
    return {p.K_itrq * err, (p.P_m_w_bar - wr * y) / (2.0 * p.H_w_bar * wr)};
}

inline double wtg_generic_output(const WtgGenericParams& p, double x, double wr, double u) {
    return wr * (x + p.K_ptrq * (wr - p.omega_ref_bar + u));
}

/// Analytic Jacobian of the torque-control model at its u = 0 equilibrium
/// (w_r0 = w_ref, x0 = y0 = P_m / w_r0). The output is the deviation of
/// P_G = w_r * y. Optionally validates a caller-supplied operating point.
inline WtgLinearParams linearize_wtg(const WtgGenericParams& p,
                                     std::optional<std::pair<double, double>> operating_point = std::nullopt) {
    p.validate();
    const double w0 = p.omega_ref_bar;
    const double y0 = p.P_m_w_bar / w0;
    const double x0 = y0;
    if (operating_point) {
        const auto [xo, wo] = *operating_point;
        const Eigen::Vector2d r = wtg_generic_rhs(p, xo, wo, 0.0);
        if (r.norm() > 1e-9) throw std::invalid_argument("linearize_wtg: supplied operating point is not an equilibrium");
        if (std::abs(xo - x0) > 1e-9 || std::abs(wo - w0) > 1e-9)
            throw std::invalid_argument("linearize_wtg: operating point disagrees with parameters");
    }
    WtgLinearParams w;
    const double a = 1.0 / (2.0 * p.H_w_bar);
    w.A.resize(2, 2);
    w.A << 0.0, p.K_itrq,
           -a, -(y0 + w0 * p.K_ptrq) * a / w0;
    w.B.resize(2);
    w.B << p.K_itrq, -p.K_ptrq * a;
    w.C.resize(2);
    w.C << w0, y0 + w0 * p.K_ptrq;
    w.D = w0 * p.K_ptrq;
    w.state_names = {"dxw", "dwr"};
    if (!is_hurwitz(w.A)) throw std::invalid_argument("linearize_wtg: linearization is unstable");
    return w;
}

/// One generator row of the fleet table.
struct FleetEntry {
    enum class Kind { kSG, kWTG };
    std::string id;
    int bus = 0;
    Kind kind = Kind::kSG;
    double output_mw = 0.0;
    double base_mva = 0.0;
    double inertia_s = 0.0;
    double p_max_mw = 0.0;
    double p_min_mw = 0.0;

    void validate() const {
        if (base_mva <= 0.0 || inertia_s <= 0.0) throw std::invalid_argument("FleetEntry: base and inertia must be positive");
        if (!(p_min_mw <= output_mw && output_mw <= p_max_mw))
            throw std::invalid_argument("FleetEntry '" + id + "': output outside [P_min, P_max]");
    }

    double headroom_mw() const { return std::min(p_max_mw - output_mw, output_mw - p_min_mw); }
};

struct CoiAggregate {
    double H_coi = 0.0;  // s
    double S_sg = 0.0;   // MVA
};

inline CoiAggregate coi_aggregate(std::span<const FleetEntry> sgs) {
    if (sgs.empty()) throw std::invalid_argument("coi_aggregate: empty generator list");
    double sh = 0.0, s = 0.0;
    for (const auto& g : sgs) {
        g.validate();
        sh += g.base_mva * g.inertia_s;
        s += g.base_mva;
    }
    return {sh / s, s};
}

struct WtgAggregate {
    double H_w_bar = 0.0;  // s
    double S_wt = 0.0;     // MVA
    double k_scal = 0.0;
};

inline WtgAggregate wtg_aggregate(std::span<const FleetEntry> wtgs, double S_sg) {
    if (wtgs.empty()) throw std::invalid_argument("wtg_aggregate: empty actuator list");
    if (S_sg <= 0.0) throw std::invalid_argument("wtg_aggregate: S_sg must be positive");
    double sh = 0.0, s = 0.0;
    for (const auto& g : wtgs) {
        g.validate();
        sh += g.base_mva * g.inertia_s;
        s += g.base_mva;
    }
    return {sh / s, s, s / S_sg};
}

/// Polynomial closed-loop vector fields over [dw, dPm, dPv, x_w...] plus the
/// disturbance as the last variable. f_on has the IE input resolved through
/// the feedthrough algebraic loop; f_off is the no-support response.
struct ClosedLoopModel {
    std::vector<Polynomial> f_on;
    std::vector<Polynomial> f_off;
    std::vector<std::string> state_names;
    int disturbance_index = 0;
    double wellposed_factor = 1.0;
    SfrParams sfr;
    WtgLinearParams wtg;

    int nstates() const { return static_cast<int>(f_on.size()); }
    int nvars() const { return nstates() + 1; }

    /// FNV-1a over the canonical text of both fields; identifies the model a
    /// certificate was computed for.
    std::string fingerprint() const {
        std::ostringstream os;
        os.precision(17);
        for (const auto& f : f_on) os << f.str() << ";";
        os << "|";
        for (const auto& f : f_off) os << f.str() << ";";
        const std::string s = os.str();
        std::uint64_t h = 1469598103934665603ull;
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ull;
        }
        std::ostringstream hex;
        hex << std::hex << h;
        return hex.str();
    }
};

class IllPosedLoopError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Substitutes the WTG output into the swing equation and resolves the
/// feedthrough loop: dw' = (dPm + k_scal C x_w - d) / (2H * wp) with
/// wp = 1 - k_scal D k_ie / (2H).
inline ClosedLoopModel close_loop(const SfrParams& sfr, const WtgLinearParams& wtg) {
    sfr.validate();
    wtg.validate();
    const int nw = wtg.nstates();
    const int ns = 3 + nw;
    const int nv = ns + 1;  // + disturbance
    const int id = ns;      // disturbance index

    const double wp = 1.0 - sfr.k_scal * wtg.D * wtg.k_ie / (2.0 * sfr.H);
    if (std::abs(wp) < 1e-6) throw IllPosedLoopError("close_loop: feedthrough loop is singular");

    auto var = [&](int i) { return Polynomial::variable(nv, i); };
    const Polynomial dw = var(0), pm = var(1), pv = var(2), d = var(id);

    Polynomial cw_x = Polynomial::zero(nv);
    for (int j = 0; j < nw; ++j) cw_x += var(3 + j) * wtg.C(j);

    // numerator of the swing equation, shared by both modes
    const Polynomial swing_num = pm + cw_x * sfr.k_scal - d;

    ClosedLoopModel m;
    m.sfr = sfr;
    m.wtg = wtg;
    m.disturbance_index = id;
    m.wellposed_factor = wp;
    m.state_names = {"dw", "dpm", "dpv"};
    for (int j = 0; j < nw; ++j)
        m.state_names.push_back(j < static_cast<int>(wtg.state_names.size()) ? wtg.state_names[static_cast<size_t>(j)]
                                                                             : "xw" + std::to_string(j));

    const Polynomial pm_dot = (pv - pm) * (1.0 / sfr.tau_T);
    const Polynomial pv_dot = (dw * (-1.0 / sfr.R) - pv) * (1.0 / sfr.tau_G);

    // IE on: u = k_ie * dw'
    const Polynomial dw_dot_on = swing_num * (1.0 / (2.0 * sfr.H * wp));
    m.f_on.push_back(dw_dot_on);
    m.f_on.push_back(pm_dot);
    m.f_on.push_back(pv_dot);
    for (int j = 0; j < nw; ++j) {
        Polynomial xj_dot = dw_dot_on * (wtg.B(j) * wtg.k_ie);
        for (int k = 0; k < nw; ++k)
            if (wtg.A(j, k) != 0.0) xj_dot += var(3 + k) * wtg.A(j, k);
        m.f_on.push_back(xj_dot);
    }

    // IE off: u = 0
    m.f_off.push_back(swing_num * (1.0 / (2.0 * sfr.H)));
    m.f_off.push_back(pm_dot);
    m.f_off.push_back(pv_dot);
    for (int j = 0; j < nw; ++j) {
        Polynomial xj_dot = Polynomial::zero(nv);
        for (int k = 0; k < nw; ++k)
            if (wtg.A(j, k) != 0.0) xj_dot += var(3 + k) * wtg.A(j, k);
        m.f_off.push_back(xj_dot);
    }
    return m;
}

// ---- inertia-emulation gain design ----------------------------------------

struct GainAllocation {
    std::string id;
    double rho = 0.0;   // share of the total requirement
    double k_ie = 0.0;  // per-unit power per RoCoF-signal unit
};

struct GainDesign {
    double delta_Pd_w = 0.0;     // disturbance, W
    double A_m_w_per_s = 0.0;    // averaged mechanical power slope, W/s
    double A_r = 0.0;            // averaged RoCoF in signal units (e.g. Hz/s)
    double T_nad_s = 0.0;        // time to nadir, s
    double k_ad = 0.0;           // required compensation fraction
    double required_support_w = 0.0;
    std::vector<GainAllocation> allocations;
};

class AllocationError : public std::runtime_error {
  public:
    AllocationError(const std::string& msg, double shortfall_w)
        : std::runtime_error(msg), shortfall_w(shortfall_w) {}
    double shortfall_w;
};

/// Greedy allocation by available headroom (largest first). Each gain is
/// k_ie_i = rho_i * k_ad (dPd - 0.5 A_m T_nad) / (S_i A_r), clipped so the
/// supportive power S_i k_ie_i A_r never exceeds min(Pmax-pg, pg-Pmin).
/// All powers are in watts on each machine base; A_r is in signal units.
inline GainDesign design_gain(std::span<const FleetEntry> wtgs, double delta_Pd_w, double A_m_w_per_s,
                              double A_r, double T_nad_s, double k_ad) {
    if (wtgs.empty()) throw std::invalid_argument("design_gain: empty actuator list");
    if (!(A_r > 0.0) || !(T_nad_s > 0.0)) throw std::invalid_argument("design_gain: A_r and T_nad must be positive");
    GainDesign g;
    g.delta_Pd_w = delta_Pd_w;
    g.A_m_w_per_s = A_m_w_per_s;
    g.A_r = A_r;
    g.T_nad_s = T_nad_s;
    g.k_ad = k_ad;
    g.required_support_w = k_ad * (delta_Pd_w - 0.5 * A_m_w_per_s * T_nad_s);

    std::vector<const FleetEntry*> order;
    for (const auto& w : wtgs) {
        w.validate();
        order.push_back(&w);
    }
    std::stable_sort(order.begin(), order.end(),
                     [](const FleetEntry* a, const FleetEntry* b) { return a->headroom_mw() > b->headroom_mw(); });

    const double need = std::max(g.required_support_w, 0.0);
    double remaining = need;
    for (const FleetEntry* w : order) {
        const double headroom_w = w->headroom_mw() * 1e6;
        const double take = std::min(headroom_w, remaining);
        GainAllocation a;
        a.id = w->id;
        a.rho = need > 0.0 ? take / need : 0.0;
        a.k_ie = take / (w->base_mva * 1e6 * A_r);
        g.allocations.push_back(a);
        remaining -= take;
        if (remaining <= 1e-9) break;
    }
    if (remaining > 1e-9)
        throw AllocationError("design_gain: total WTG headroom is insufficient", remaining);
    return g;
}

// ---- fleet table -----------------------------------------------------------

/// Loads a whitespace-delimited table with columns
///   id bus type output_mw base_mva inertia_s p_max_mw p_min_mw
/// where type is SG or WTG. Lines starting with '#' are comments.
inline std::vector<FleetEntry> load_fleet_table(std::istream& in) {
    std::vector<FleetEntry> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        FleetEntry e;
        std::string type;
        if (!(ls >> e.id >> e.bus >> type >> e.output_mw >> e.base_mva >> e.inertia_s >> e.p_max_mw >> e.p_min_mw))
            throw std::invalid_argument("fleet table: malformed line " + std::to_string(lineno));
        if (type == "SG") e.kind = FleetEntry::Kind::kSG;
        else if (type == "WTG") e.kind = FleetEntry::Kind::kWTG;
        else throw std::invalid_argument("fleet table: unknown type '" + type + "' at line " + std::to_string(lineno));
        e.validate();
        out.push_back(std::move(e));
    }
    return out;
}

inline std::vector<FleetEntry> load_fleet_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("fleet table: cannot open " + path);
    return load_fleet_table(in);
}

inline std::vector<FleetEntry> filter_kind(std::span<const FleetEntry> fleet, FleetEntry::Kind kind) {
    std::vector<FleetEntry> out;
    for (const auto& e : fleet)
        if (e.kind == kind) out.push_back(e);
    return out;
}

}  // namespace ssc
