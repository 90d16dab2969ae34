#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "ssc/sos.hpp"

namespace ssc {

enum class SolveStatus { kOptimal, kInfeasible, kMaxIterations };

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::kOptimal: return "optimal";
        case SolveStatus::kInfeasible: return "infeasible";
        case SolveStatus::kMaxIterations: return "max-iterations";
    }
    return "?";
}

struct SolverOptions {
    double tolerance = 1e-6;
    int max_iterations = 100000;
    double rho = 1.0;
    double over_relaxation = 1.6;
    bool scaling = true;
    int ruiz_iterations = 10;
    int check_interval = 25;
    bool adaptive_rho = true;
    std::ostream* diagnostics = nullptr;  // CSV: iter,primal,dual,gap,rho
};

struct SdpSolution {
    SolveStatus status = SolveStatus::kMaxIterations;
    Eigen::VectorXd v;  // cone-feasible variable vector (free + svec blocks)
    Eigen::VectorXd y;  // equality multipliers
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double gap = 0.0;
    double objective = 0.0;
    int iterations = 0;
};

class MalformedProblemError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

namespace detail {

struct SparseMat {
    int rows = 0, cols = 0;
    // column-compressed
    std::vector<int> col_ptr, row_idx;
    std::vector<double> val;

    static SparseMat from_entries(int m, int n, std::span<const SdpEntry> entries) {
        SparseMat s;
        s.rows = m;
        s.cols = n;
        std::vector<int> count(static_cast<size_t>(n) + 1, 0);
        for (const auto& e : entries) ++count[static_cast<size_t>(e.col) + 1];
        s.col_ptr.resize(static_cast<size_t>(n) + 1, 0);
        for (int j = 0; j < n; ++j) s.col_ptr[static_cast<size_t>(j) + 1] = s.col_ptr[static_cast<size_t>(j)] + count[static_cast<size_t>(j) + 1];
        s.row_idx.resize(entries.size());
        s.val.resize(entries.size());
        std::vector<int> fill(s.col_ptr.begin(), s.col_ptr.end() - 1);
        for (const auto& e : entries) {
            const int p = fill[static_cast<size_t>(e.col)]++;
            s.row_idx[static_cast<size_t>(p)] = e.row;
            s.val[static_cast<size_t>(p)] = e.val;
        }
        // merge duplicates is unnecessary; assembly never emits them
        return s;
    }

    void multiply(const Eigen::VectorXd& x, Eigen::VectorXd& out) const {  // out = A x
        out.setZero(rows);
        for (int j = 0; j < cols; ++j) {
            const double xj = x(j);
            if (xj == 0.0) continue;
            for (int p = col_ptr[static_cast<size_t>(j)]; p < col_ptr[static_cast<size_t>(j) + 1]; ++p)
                out(row_idx[static_cast<size_t>(p)]) += val[static_cast<size_t>(p)] * xj;
        }
    }

    void multiply_transpose(const Eigen::VectorXd& u, Eigen::VectorXd& out) const {  // out = A' u
        out.setZero(cols);
        for (int j = 0; j < cols; ++j) {
            double s = 0.0;
            for (int p = col_ptr[static_cast<size_t>(j)]; p < col_ptr[static_cast<size_t>(j) + 1]; ++p)
                s += val[static_cast<size_t>(p)] * u(row_idx[static_cast<size_t>(p)]);
            out(j) = s;
        }
    }
};

struct ConeLayout {
    int n_free = 0;
    std::vector<int> dims;
    std::vector<int> offsets;  // svec offset per block

    static ConeLayout of(const SdpProblem& p) {
        ConeLayout c;
        c.n_free = p.n_free;
        c.dims = p.psd_dims;
        int off = p.n_free;
        for (int d : c.dims) {
            c.offsets.push_back(off);
            off += svec_size(d);
        }
        return c;
    }
};

inline void unsvec(const double* s, int n, Eigen::MatrixXd& M) {
    M.resize(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i <= j; ++i) {
            const double v = s[svec_index(i, j)];
            if (i == j) M(i, j) = v;
            else {
                M(i, j) = v / kSqrt2;
                M(j, i) = v / kSqrt2;
            }
        }
}

inline void svec(const Eigen::MatrixXd& M, double* s) {
    const int n = static_cast<int>(M.rows());
    for (int j = 0; j < n; ++j)
        for (int i = 0; i <= j; ++i) s[svec_index(i, j)] = (i == j) ? M(i, j) : M(i, j) * kSqrt2;
}

/// Projects the svec segments of x onto the PSD cones (free part untouched).
inline void project_cone(Eigen::VectorXd& x, const ConeLayout& cone) {
    Eigen::MatrixXd M;
    for (size_t b = 0; b < cone.dims.size(); ++b) {
        const int n = cone.dims[b];
        double* seg = x.data() + cone.offsets[b];
        unsvec(seg, n, M);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
        const auto& w = es.eigenvalues();
        if (w(0) >= 0.0) continue;  // already PSD
        Eigen::MatrixXd R = Eigen::MatrixXd::Zero(n, n);
        for (int k = 0; k < n; ++k)
            if (w(k) > 0.0) R += w(k) * es.eigenvectors().col(k) * es.eigenvectors().col(k).transpose();
        svec(R, seg);
    }
}

/// Distance-to-cone measure for certificates: most negative eigenvalue over
/// PSD parts and the largest |free| entry.
inline double cone_violation(const Eigen::VectorXd& x, const ConeLayout& cone, bool dual) {
    double viol = 0.0;
    if (dual)
        for (int i = 0; i < cone.n_free; ++i) viol = std::max(viol, std::abs(x(i)));
    Eigen::MatrixXd M;
    for (size_t b = 0; b < cone.dims.size(); ++b) {
        unsvec(x.data() + cone.offsets[b], cone.dims[b], M);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
        viol = std::max(viol, std::max(0.0, -es.eigenvalues()(0)));
    }
    return viol;
}

}  // namespace detail

/// First-order operator-splitting solver for
///   min c'v  s.t.  A v = b,  v in (free x PSD cones).
/// Splitting: equality-constrained least-squares step (cached Cholesky of
/// A A'), cone projection via dense eigendecomposition per block, scaled dual
/// update with over-relaxation, diagonal (Ruiz) equilibration up front.
/// Deterministic: identical inputs and options give identical iterates.
inline SdpSolution solve_sdp(const SdpProblem& problem, const SolverOptions& opts = {}) {
    using detail::ConeLayout;
    using detail::SparseMat;
    const int m = problem.n_rows;
    const int n = problem.n_vars();
    if (m == 0 || n == 0) throw MalformedProblemError("solve_sdp: empty problem");
    for (const auto& e : problem.entries)
        if (e.row < 0 || e.row >= m || e.col < 0 || e.col >= n)
            throw MalformedProblemError("solve_sdp: entry out of range");

    const ConeLayout cone = ConeLayout::of(problem);

    // --- equilibration: row scaling d, block-uniform column scaling e
    Eigen::VectorXd d = Eigen::VectorXd::Ones(m);
    Eigen::VectorXd e = Eigen::VectorXd::Ones(n);
    std::vector<SdpEntry> scaled = problem.entries;
    if (opts.scaling) {
        for (int it = 0; it < opts.ruiz_iterations; ++it) {
            Eigen::VectorXd rmax = Eigen::VectorXd::Zero(m), cmax = Eigen::VectorXd::Zero(n);
            for (const auto& en : scaled) {
                const double a = std::abs(en.val);
                rmax(en.row) = std::max(rmax(en.row), a);
                cmax(en.col) = std::max(cmax(en.col), a);
            }
            // uniform scale inside each PSD block keeps the cone invariant
            for (size_t b = 0; b < cone.dims.size(); ++b) {
                const int off = cone.offsets[b], len = svec_size(cone.dims[b]);
                const double blk = cmax.segment(off, len).maxCoeff();
                cmax.segment(off, len).setConstant(blk);
            }
            Eigen::VectorXd dr(m), dc(n);
            for (int i = 0; i < m; ++i) dr(i) = rmax(i) > 0 ? 1.0 / std::sqrt(rmax(i)) : 1.0;
            for (int j = 0; j < n; ++j) dc(j) = cmax(j) > 0 ? 1.0 / std::sqrt(cmax(j)) : 1.0;
            for (auto& en : scaled) en.val *= dr(en.row) * dc(en.col);
            d = d.cwiseProduct(dr);
            e = e.cwiseProduct(dc);
        }
    }

    Eigen::VectorXd b_s(m), c_s(n);
    for (int i = 0; i < m; ++i) b_s(i) = d(i) * problem.rhs[static_cast<size_t>(i)];
    for (int j = 0; j < n; ++j) c_s(j) = e(j) * problem.objective[static_cast<size_t>(j)];
    const double beta = 1.0 / std::max(b_s.norm(), 1e-12);
    const double sigma = c_s.norm() > 0 ? 1.0 / c_s.norm() : 1.0;
    b_s *= beta;
    c_s *= sigma;

    const SparseMat A = SparseMat::from_entries(m, n, scaled);

    // Gram matrix of the equality rows, factored once
    Eigen::MatrixXd AAt = Eigen::MatrixXd::Zero(m, m);
    for (int j = 0; j < n; ++j) {
        const int p0 = A.col_ptr[static_cast<size_t>(j)], p1 = A.col_ptr[static_cast<size_t>(j) + 1];
        for (int p = p0; p < p1; ++p)
            for (int q = p0; q <= p; ++q) {
                const int r1 = A.row_idx[static_cast<size_t>(p)], r2 = A.row_idx[static_cast<size_t>(q)];
                const double v = A.val[static_cast<size_t>(p)] * A.val[static_cast<size_t>(q)];
                if (r1 >= r2) AAt(r1, r2) += v;
                else AAt(r2, r1) += v;
            }
    }
    AAt.triangularView<Eigen::StrictlyUpper>() = AAt.transpose().triangularView<Eigen::StrictlyUpper>();
    Eigen::LLT<Eigen::MatrixXd> llt(AAt);
    if (llt.info() != Eigen::Success)
        throw MalformedProblemError("solve_sdp: equality rows are structurally inconsistent");

    // --- ADMM state
    double rho = opts.rho;
    Eigen::VectorXd z = Eigen::VectorXd::Zero(n), u = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd w(n), x(n), xh(n), mu(m), tmp_m(m), Atmu(n), rhs(m), Ax(m), Aty(n);
    Eigen::VectorXd Ac(m);
    A.multiply(c_s, Ac);
    const Eigen::VectorXd b_unscaled = Eigen::Map<const Eigen::VectorXd>(problem.rhs.data(), m);
    const Eigen::VectorXd c_unscaled = Eigen::Map<const Eigen::VectorXd>(problem.objective.data(), n);
    const double bnorm = b_unscaled.norm(), cnorm = c_unscaled.norm();

    SdpSolution sol;
    Eigen::VectorXd mu_prev = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd z_prev = z;

    auto unscale_v = [&](const Eigen::VectorXd& zz) {
        Eigen::VectorXd out = zz.cwiseProduct(e) / beta;
        return out;
    };

    int it = 0;
    for (; it < opts.max_iterations; ++it) {
        w = z - u;
        A.multiply(w, tmp_m);
        rhs = rho * (tmp_m - b_s) - Ac;
        mu = llt.solve(rhs);
        A.multiply_transpose(mu, Atmu);
        x = w - (c_s + Atmu) / rho;
        xh = opts.over_relaxation * x + (1.0 - opts.over_relaxation) * z;
        z_prev = z;
        z = xh + u;
        detail::project_cone(z, cone);
        u += xh - z;

        const bool check = (it % opts.check_interval == 0) || it == opts.max_iterations - 1;
        if (!check) continue;

        // unscaled iterates: v = E z / beta, y = D mu / sigma, lambda = -rho E^{-1} u / sigma
        Eigen::VectorXd v_us = unscale_v(z);
        Eigen::VectorXd y_us = mu.cwiseProduct(d) / sigma;
        Eigen::VectorXd lam_us = (-rho / sigma) * u.cwiseQuotient(e);
        // primal residual on the original data
        Eigen::VectorXd Av(m);
        {
            Eigen::VectorXd t1;
            // original A times v: use scaled A with compensation A_orig = D^-1 A_s E^-1
            Eigen::VectorXd ve = v_us;  // already unscaled
            // direct product via entries of the original matrix
            Av.setZero();
            for (const auto& en : problem.entries) Av(en.row) += en.val * ve(en.col);
        }
        const double pres = (Av - b_unscaled).norm() / (1.0 + bnorm);
        Eigen::VectorXd Aty_us = Eigen::VectorXd::Zero(n);
        for (const auto& en : problem.entries) Aty_us(en.col) += en.val * y_us(en.row);
        const double dres = (c_unscaled + Aty_us - lam_us).norm() / (1.0 + cnorm);
        const double pobj = c_unscaled.dot(v_us);
        const double dobj = -b_unscaled.dot(y_us);
        const double gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));

        if (opts.diagnostics)
            (*opts.diagnostics) << it << "," << pres << "," << dres << "," << gap << "," << rho << "\n";

        if (pres <= opts.tolerance && dres <= opts.tolerance && gap <= opts.tolerance) {
            sol.status = SolveStatus::kOptimal;
            sol.v = v_us;
            sol.y = y_us;
            sol.primal_residual = pres;
            sol.dual_residual = dres;
            sol.gap = gap;
            sol.objective = pobj;
            sol.iterations = it + 1;
            return sol;
        }

        // primal-infeasibility certificate: y with A'y in -K*, b'y > 0
        {
            Eigen::VectorXd dy = y_us - mu_prev;
            const double ny = dy.norm();
            if (ny > 1e-12) {
                dy /= ny;
                Eigen::VectorXd Atd = Eigen::VectorXd::Zero(n);
                for (const auto& en : problem.entries) Atd(en.col) += en.val * dy(en.row);
                const double bty = b_unscaled.dot(dy);
                // -A'dy must lie in the dual cone (zero on free part, PSD blocks)
                Eigen::VectorXd neg = -Atd;
                const double viol = detail::cone_violation(neg, cone, /*dual=*/true);
                const double scale_ref = std::max(1.0, bnorm);
                if (bty > 1e-7 * scale_ref && viol <= 1e-7 * std::max(1.0, Atd.norm())) {
                    sol.status = SolveStatus::kInfeasible;
                    sol.v = v_us;
                    sol.y = dy;
                    sol.primal_residual = pres;
                    sol.dual_residual = dres;
                    sol.gap = gap;
                    sol.objective = pobj;
                    sol.iterations = it + 1;
                    return sol;
                }
            }
            mu_prev = y_us;
        }

        if (opts.adaptive_rho && it > 0 && it % (opts.check_interval * 4) == 0) {
            // balance the scaled-space residuals
            const double pr = (A.rows ? ([&] {
                                   Eigen::VectorXd t(m);
                                   A.multiply(z, t);
                                   return (t - b_s).norm();
                               })()
                                      : 0.0);
            const double dr = rho * (z - z_prev).norm();
            if (pr > 10.0 * dr && rho < 1e6) {
                rho *= 2.0;
                u *= 0.5;
            } else if (dr > 10.0 * pr && rho > 1e-6) {
                rho *= 0.5;
                u *= 2.0;
            }
        }
    }

    // max iterations: report the best current iterate
    Eigen::VectorXd v_us = unscale_v(z);
    Eigen::VectorXd y_us = mu.cwiseProduct(d) / sigma;
    Eigen::VectorXd Av = Eigen::VectorXd::Zero(m);
    for (const auto& en : problem.entries) Av(en.row) += en.val * v_us(en.col);
    Eigen::VectorXd Aty_us = Eigen::VectorXd::Zero(n);
    for (const auto& en : problem.entries) Aty_us(en.col) += en.val * y_us(en.row);
    Eigen::VectorXd lam_us = (-rho / sigma) * u.cwiseQuotient(e);
    sol.status = SolveStatus::kMaxIterations;
    sol.v = v_us;
    sol.y = y_us;
    sol.primal_residual = (Av - b_unscaled).norm() / (1.0 + bnorm);
    sol.dual_residual = (c_unscaled + Aty_us - lam_us).norm() / (1.0 + cnorm);
    sol.objective = c_unscaled.dot(v_us);
    sol.gap = std::abs(sol.objective + b_unscaled.dot(y_us)) / (1.0 + std::abs(sol.objective));
    sol.iterations = it;
    return sol;
}

// ---- extraction ------------------------------------------------------------

struct ExtractedPolynomials {
    Polynomial B{1};
    Polynomial Omega{1};
    std::vector<Polynomial> sigmas;
};

/// Maps free variables back to polynomial coefficients; coefficients below
/// 1e-12 in magnitude are clamped to zero.
inline ExtractedPolynomials extract_polynomials(const SdpSolution& sol, const SosProgram& prog) {
    if (sol.status != SolveStatus::kOptimal)
        throw std::runtime_error("extract_polynomials: solution status is not optimal");
    ExtractedPolynomials out;
    auto build = [&](int u) {
        const auto& up = prog.unknowns[static_cast<size_t>(u)];
        const int off = unknown_offset(prog, u);
        std::vector<Polynomial::Term> terms;
        for (size_t k = 0; k < up.basis.size(); ++k) {
            const double c = sol.v(off + static_cast<int>(k));
            if (std::abs(c) >= 1e-12) terms.emplace_back(up.basis[k], c);
        }
        return Polynomial::from_terms(up.nvars, std::move(terms));
    };
    out.B = build(0);
    out.Omega = prog.unknowns.size() > 1 ? build(1) : Polynomial::zero(prog.unknowns[0].nvars);

    // multiplier polynomials from the Gram blocks, in constraint order
    int n_free = 0;
    for (const auto& u : prog.unknowns) n_free += static_cast<int>(u.basis.size());
    int off = n_free;
    for (const auto& c : prog.constraints) {
        for (const auto& mmul : c.multipliers) {
            const int dim = static_cast<int>(mmul.half_basis.size());
            Eigen::MatrixXd Q;
            detail::unsvec(sol.v.data() + off, dim, Q);
            Polynomial sigma(c.nvars);
            for (int jj = 0; jj < dim; ++jj)
                for (int ii = 0; ii < dim; ++ii) {
                    const double q = Q(ii, jj);
                    if (q != 0.0)
                        sigma += Polynomial::from_monomial(mmul.half_basis[static_cast<size_t>(ii)] *
                                                               mmul.half_basis[static_cast<size_t>(jj)],
                                                           q);
                }
            out.sigmas.push_back(std::move(sigma));
            off += svec_size(dim);
        }
        off += svec_size(static_cast<int>(c.own_half_basis.size()));
    }
    return out;
}

struct CheckSosResult {
    bool is_sos = false;
    SolveStatus status = SolveStatus::kMaxIterations;
    Eigen::MatrixXd gram;                 // valid when is_sos
    std::vector<Monomial> gram_basis;
    double reconstruction_error = 0.0;    // max coefficient mismatch when is_sos
};

/// Standalone SOS feasibility test through the same solver path.
inline CheckSosResult check_sos(const Polynomial& p, const SolverOptions& opts = {}) {
    if (p.degree() % 2 != 0) throw std::invalid_argument("check_sos: polynomial degree must be even");
    SosProgram prog;
    SosConstraint c;
    c.name = "sos_check";
    c.nvars = p.nvars();
    c.degree = p.degree() == 0 ? 2 : p.degree();
    c.constant_part = p;
    c.finalize();
    prog.constraints.push_back(std::move(c));
    prog.objective_unknown = -1;

    SdpProblem sdp = to_sdp(prog, {});
    SdpSolution sol = solve_sdp(sdp, opts);
    CheckSosResult res;
    res.status = sol.status;
    res.is_sos = sol.status == SolveStatus::kOptimal;
    if (res.is_sos) {
        const auto& cc = prog.constraints[0];
        res.gram_basis = cc.own_half_basis;
        const int dim = static_cast<int>(cc.own_half_basis.size());
        detail::unsvec(sol.v.data(), dim, res.gram);
        // reconstruct p from the Gram matrix and compare coefficients
        Polynomial rec(p.nvars());
        for (int j = 0; j < dim; ++j)
            for (int i = 0; i < dim; ++i)
                if (res.gram(i, j) != 0.0)
                    rec += Polynomial::from_monomial(res.gram_basis[static_cast<size_t>(i)] * res.gram_basis[static_cast<size_t>(j)],
                                                     res.gram(i, j));
        Polynomial diff = rec - p;
        double err = 0.0;
        for (const auto& [mm, vv] : diff.terms()) err = std::max(err, std::abs(vv));
        res.reconstruction_error = err;
    }
    return res;
}

}  // namespace ssc
