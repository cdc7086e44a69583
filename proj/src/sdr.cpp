// SPDX-License-Identifier: Apache-2.0
#include "isac/sdr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"

#include "isac/geometry.hpp"
#include "isac/sdp.hpp"

namespace isac {

CVec SdrProblem::channel_vector(int m, int k, int u) const {
    return channel.row(m, k, u).adjoint();
}

CMat SdrProblem::gram(int m, int k, int u) const {
    const CVec g = channel_vector(m, k, u);
    return g * g.adjoint();
}

void SdrProblem::validate() const {
    if (n_tx < 1 || n_users < 1 || n_sub < 1) throw InvalidArgument("sdr problem: empty dimensions");
    if (channel.n_sub != n_sub || static_cast<int>(channel.blocks.size()) != n_sub * n_sub)
        throw ShapeError("sdr problem: channel block grid does not match n_sub");
    for (const auto& b : channel.blocks)
        if (b.rows() != n_users || b.cols() != n_tx) throw ShapeError("sdr problem: channel block shape");
    if (A.cols() != n_tx || dA.rows() != A.rows() || dA.cols() != n_tx)
        throw ShapeError("sdr problem: sensing matrices");
    if (sense_scale.size() != n_sub) throw ShapeError("sdr problem: sense_scale length");
    if ((sense_scale.array() < 0.0).any()) throw InvalidArgument("sdr problem: negative sense scale");
    if (!(noise_term > 0.0)) throw InvalidArgument("sdr problem: noise term must be positive");
    if (power_budget < 0.0) throw InvalidArgument("sdr problem: negative power budget");
    if (weights.psi < 0.0 || weights.psi > 1.0) throw InvalidArgument("sdr problem: psi outside [0,1]");
}

SdrProblem make_sdr_problem(const IciBlocks& channel, double theta, const std::vector<cd>& alpha,
                            const SystemConfig& config, const UtilityWeights& weights) {
    SdrProblem p;
    p.n_tx = config.n_tx;
    p.n_users = config.n_users;
    p.n_sub = config.n_sub;
    p.channel = channel;
    p.noise_term = config.sinr_noise_term();
    const CVec at = steering_vector(theta, config.n_tx);
    const CVec ar = steering_vector(theta, config.n_rx);
    p.A = ar * at.adjoint();
    p.dA = steering_vector_derivative(theta, config.n_rx) * at.adjoint() +
           ar * steering_vector_derivative(theta, config.n_tx).adjoint();
    if (static_cast<int>(alpha.size()) != config.n_sub) throw ShapeError("make_sdr_problem: alpha length");
    p.sense_scale.resize(config.n_sub);
    const double k = config.total_power_w() /
                     (config.noise_sense_w() * config.n_tx * config.n_users * config.n_sub);
    for (int m = 0; m < config.n_sub; ++m) p.sense_scale[m] = 2.0 * std::norm(alpha[m]) * k;
    p.weights = weights;
    p.validate();
    return p;
}

const char* to_string(SdrStatus s) {
    switch (s) {
        case SdrStatus::optimal: return "optimal";
        case SdrStatus::infeasible: return "infeasible";
        case SdrStatus::max_iterations: return "max_iterations";
        case SdrStatus::numerical_error: return "numerical_error";
    }
    return "unknown";
}

namespace {

struct SensingMats {
    CMat dd, aa, da_re, da_im;
};

SensingMats sensing_mats(const SdrProblem& p) {
    const CMat dd = p.dA.adjoint() * p.dA;
    const CMat aa = p.A.adjoint() * p.A;
    const CMat da = p.dA.adjoint() * p.A;
    return {0.5 * (dd + dd.adjoint()), 0.5 * (aa + aa.adjoint()), 0.5 * (da + da.adjoint()),
            (da - da.adjoint()) / cd(0.0, 2.0)};
}

sdp::Options ipm_options(const SdrOptions& o) {
    sdp::Options s;
    s.tol = o.tol;
    s.max_iter = o.max_iter;
    if (o.trace) s.trace = [t = o.trace](const std::string& line) { t(R"({"stage":"ipm","data":)" + line + "}"); };
    return s;
}

// Adds the SINR rows signal - tau * (IUI + ICI) - s_mu [- t] = rhs for every (m, u).
void add_sinr_rows(const SdrProblem& p, sdp::Problem& sp, double tau, int first_row, int first_slack,
                   int margin_block) {
    const int U = p.n_users, M = p.n_sub;
    for (int m = 0; m < M; ++m)
        for (int u = 0; u < U; ++u) {
            const int row = first_row + m * U + u;
            for (int k = 0; k < M; ++k) {
                const CVec g = p.channel_vector(m, k, u);
                for (int i = 0; i < U; ++i) {
                    const double coeff = (k == m && i == u) ? 1.0 : -tau;
                    sp.add_rank1(k * U + i, row, g, coeff);
                }
            }
            sp.add_rank1(first_slack + m * U + u, row, CVec::Ones(1), -1.0);
            if (margin_block >= 0) sp.add_rank1(margin_block, row, CVec::Ones(1), -1.0);
        }
}

void add_power_row(const SdrProblem& p, sdp::Problem& sp, int row, int slack_block) {
    const int n = p.n_tx;
    for (int b = 0; b < p.n_sub * p.n_users; ++b) sp.add_entry(b, row, CMat::Identity(n, n), RVec::Ones(n));
    sp.add_rank1(slack_block, row, CVec::Ones(1), 1.0);
}

std::vector<CMat> extract_w(const sdp::Result& r, int count) {
    std::vector<CMat> W(r.X.begin(), r.X.begin() + count);
    for (auto& w : W) w = 0.5 * (w + w.adjoint());
    return W;
}

SdrSolution zero_power_solution(const SdrProblem& p, double tau) {
    SdrSolution s;
    s.W.assign(static_cast<std::size_t>(p.n_sub * p.n_users), CMat::Zero(p.n_tx, p.n_tx));
    s.tau = tau;
    s.status = tau > 0.0 ? SdrStatus::infeasible : SdrStatus::optimal;
    return s;
}

struct MarginSolve {
    double value = 0.0;
    sdp::Result result;
};

MarginSolve solve_margin(const SdrProblem& p, double tau, const SdrOptions& o) {
    const int U = p.n_users, M = p.n_sub, MU = M * U;
    sdp::Problem sp;
    for (int b = 0; b < MU; ++b) sp.add_block(p.n_tx);
    const int first_slack = MU;
    for (int b = 0; b < MU; ++b) sp.add_block(1);
    const int margin = sp.add_block(1);
    const int power_slack = sp.add_block(1);
    sp.b = RVec::Zero(MU + 1);
    // t = t' - t0 with t' >= 0; the margin never falls below -tau * noise, so t' >= 1.
    const double t0 = tau * p.noise_term + 1.0;
    sp.b.head(MU).setConstant(tau * p.noise_term - t0);
    sp.b[MU] = p.power_budget;
    add_sinr_rows(p, sp, tau, 0, first_slack, margin);
    add_power_row(p, sp, MU, power_slack);
    sp.C[margin] = CMat::Constant(1, 1, -1.0);
    MarginSolve out;
    out.result = sdp::solve(sp, ipm_options(o));
    out.value = -out.result.primal_obj - t0;
    return out;
}

}  // namespace

double sinr_margin(const SdrProblem& problem, double tau, const SdrOptions& options) {
    problem.validate();
    if (tau < 0.0) throw InvalidArgument("sinr_margin: tau must be >= 0");
    if (problem.power_budget == 0.0) return -tau * problem.noise_term;
    const auto r = solve_margin(problem, tau, options);
    if (r.result.status == sdp::Status::numerical_error)
        throw NumericalError("sinr_margin: interior-point solver failed");
    return r.value;
}

double max_common_sinr(const SdrProblem& problem, const SdrOptions& options) {
    problem.validate();
    if (problem.power_budget == 0.0) return 0.0;
    double hi = 0.0;
    for (int m = 0; m < problem.n_sub; ++m)
        for (int u = 0; u < problem.n_users; ++u)
            hi = std::max(hi, problem.channel_vector(m, m, u).squaredNorm());
    // Interference-free single-beam bound: no common target above it is attainable.
    hi = hi * problem.power_budget / problem.noise_term * (1.0 + 1e-9);
    double lo = 0.0;
    double g_lo = sinr_margin(problem, lo, options);
    if (!(g_lo > 0.0)) return 0.0;
    double g_hi = sinr_margin(problem, hi, options);
    if (g_hi >= 0.0) return hi;
    int side = 0;
    for (int it = 0; it < 80 && hi - lo > 1e-9 * hi; ++it) {
        double t = (it % 3 == 2) ? 0.5 * (lo + hi) : hi - g_hi * (hi - lo) / (g_hi - g_lo);
        if (!(t > lo && t < hi)) t = 0.5 * (lo + hi);
        const double g = sinr_margin(problem, t, options);
        // Margins this close to zero are below the solver tolerance; t is the root.
        if (std::abs(g) <= 1e-12) return t;
        if (g >= 0.0) {
            lo = t;
            g_lo = g;
            if (side == -1) g_hi *= 0.5;
            side = -1;
        } else {
            hi = t;
            g_hi = g;
            if (side == 1) g_lo *= 0.5;
            side = 1;
        }
    }
    return lo;
}

double sdr_objective(const SdrProblem& problem, double tau, double zeta) {
    const auto& w = problem.weights;
    const double UM = static_cast<double>(problem.n_users * problem.n_sub);
    double omega = 0.0;
    if (w.psi > 0.0) {
        if (!(w.se_bound > 0.0)) throw InvalidArgument("sdr_objective: R* must be positive");
        omega += w.psi * UM * std::log2(1.0 + tau) / w.se_bound;
    }
    if (w.psi < 1.0) {
        if (!(w.fisher_bound > 0.0)) throw InvalidArgument("sdr_objective: J* must be positive");
        omega += (1.0 - w.psi) * problem.n_sub * zeta / w.fisher_bound;
    }
    return omega;
}

SdrSolution solve_inner_sdp(const SdrProblem& problem, double tau, const SdrOptions& options) {
    problem.validate();
    if (tau < 0.0) throw InvalidArgument("solve_inner_sdp: tau must be >= 0");
    const int U = problem.n_users, M = problem.n_sub, MU = M * U;
    if (problem.power_budget == 0.0) return zero_power_solution(problem, tau);

    const double c_ref = problem.sense_scale.maxCoeff();
    SdrSolution sol;
    sol.tau = tau;
    if (!(c_ref > 0.0)) {
        // No echo: the floor is zero for every precoder, so any SINR-feasible point is optimal.
        const auto r = solve_margin(problem, tau, options);
        sol.iterations = r.result.iterations;
        sol.gap = r.result.gap;
        if (r.result.status == sdp::Status::numerical_error) sol.status = SdrStatus::numerical_error;
        else if (r.value < 0.0) sol.status = SdrStatus::infeasible;
        else sol.status = r.result.status == sdp::Status::optimal ? SdrStatus::optimal : SdrStatus::max_iterations;
        sol.W = extract_w(r.result, MU);
        sol.omega = sdr_objective(problem, tau, 0.0);
        return sol;
    }

    const SensingMats S = sensing_mats(problem);
    sdp::Problem sp;
    for (int b = 0; b < MU; ++b) sp.add_block(problem.n_tx);
    const int first_z = MU;
    for (int m = 0; m < M; ++m) sp.add_block(2);
    const int zeta_block = sp.add_block(1);
    const bool with_sinr = tau > 0.0;
    const int first_slack = with_sinr ? static_cast<int>(sp.block_sizes.size()) : -1;
    if (with_sinr)
        for (int b = 0; b < MU; ++b) sp.add_block(1);
    const int power_slack = sp.add_block(1);

    const int sinr_rows = with_sinr ? MU : 0;
    const int power_row = sinr_rows;
    const int first_sense = power_row + 1;
    sp.b = RVec::Zero(first_sense + 4 * M);
    if (with_sinr) {
        sp.b.head(MU).setConstant(tau * problem.noise_term);
        add_sinr_rows(problem, sp, tau, 0, first_slack, -1);
    }
    sp.b[power_row] = problem.power_budget;
    add_power_row(problem, sp, power_row, power_slack);

    // Schur-complement LMI per subcarrier, Z_m = [[c t_dd - zeta, c t_da], [c t_da^*, c t_aa]].
    const double r = 1.0 / std::sqrt(2.0);
    CMat v_re(2, 2), v_im(2, 2);
    v_re << r, r, r, -r;
    v_im << r, r, cd(0.0, -r), cd(0.0, r);
    RVec w_off(2);
    w_off << -0.5, 0.5;
    for (int m = 0; m < M; ++m) {
        const double c = problem.sense_scale[m] / c_ref;
        const int row = first_sense + 4 * m;
        const int z = first_z + m;
        for (int u = 0; u < U; ++u) {
            const int b = m * U + u;
            if (c > 0.0) {
                sp.add_dense(b, row, c * S.dd);
                sp.add_dense(b, row + 1, c * S.da_re);
                sp.add_dense(b, row + 2, c * S.da_im);
                sp.add_dense(b, row + 3, c * S.aa);
            }
        }
        sp.add_rank1(zeta_block, row, CVec::Ones(1), -1.0);
        sp.add_rank1(z, row, CVec::Unit(2, 0), -1.0);
        sp.add_entry(z, row + 1, v_re, w_off);
        sp.add_entry(z, row + 2, v_im, w_off);
        sp.add_rank1(z, row + 3, CVec::Unit(2, 1), -1.0);
    }
    sp.C[zeta_block] = CMat::Constant(1, 1, -1.0);

    const auto res = sdp::solve(sp, ipm_options(options));
    sol.iterations = res.iterations;
    sol.gap = res.gap;
    sol.W = extract_w(res, MU);
    sol.zeta = std::max(0.0, res.X[zeta_block](0, 0).real()) * c_ref;
    switch (res.status) {
        case sdp::Status::optimal: sol.status = SdrStatus::optimal; break;
        case sdp::Status::max_iterations: sol.status = SdrStatus::max_iterations; break;
        case sdp::Status::numerical_error: sol.status = SdrStatus::numerical_error; break;
    }
    if (sol.status != SdrStatus::optimal && with_sinr) {
        // Divergence at an unattainable target is the usual failure; confirm with the margin.
        const auto m = solve_margin(problem, tau, options);
        if (m.result.status != sdp::Status::numerical_error && m.value < 0.0) sol.status = SdrStatus::infeasible;
    }
    if (sol.status == SdrStatus::infeasible) {
        sol.zeta = 0.0;
        sol.omega = -std::numeric_limits<double>::infinity();
        return sol;
    }
    const auto& w = problem.weights;
    sol.omega = (w.psi == 0.0 || w.se_bound > 0.0) && (w.psi == 1.0 || w.fisher_bound > 0.0)
                    ? sdr_objective(problem, tau, sol.zeta)
                    : 0.0;
    return sol;
}

SdrSolution solve_digital_sdr(const SdrProblem& problem, const SdrOptions& options,
                              std::optional<double> tau_max) {
    problem.validate();
    if (problem.power_budget == 0.0) return zero_power_solution(problem, 0.0);
    const double psi = problem.weights.psi;
    auto emit = [&](const SdrSolution& s) {
        if (!options.trace) return;
        nlohmann::json j{{"stage", "outer"}, {"tau", s.tau}, {"zeta", s.zeta},
                         {"omega", std::isfinite(s.omega) ? s.omega : -1.0}, {"status", to_string(s.status)}};
        options.trace(j.dump());
    };
    if (psi == 0.0) {
        auto s = solve_inner_sdp(problem, 0.0, options);
        emit(s);
        return s;
    }
    const double tmax = tau_max ? *tau_max : max_common_sinr(problem, options);
    if (!(tmax > 0.0)) {
        SdrSolution s = zero_power_solution(problem, 0.0);
        s.status = SdrStatus::infeasible;
        s.omega = -std::numeric_limits<double>::infinity();
        return s;
    }
    const double hi = tmax * (1.0 - options.tau_margin);
    if (psi == 1.0) {
        auto s = solve_inner_sdp(problem, hi, options);
        emit(s);
        return s;
    }

    SdrSolution best;
    best.omega = -std::numeric_limits<double>::infinity();
    best.status = SdrStatus::infeasible;
    auto eval = [&](double tau) {
        auto s = solve_inner_sdp(problem, tau, options);
        emit(s);
        const double om = s.status == SdrStatus::infeasible ? -std::numeric_limits<double>::infinity() : s.omega;
        if (s.status != SdrStatus::infeasible && s.status != SdrStatus::numerical_error && om > best.omega)
            best = s;
        return s.status == SdrStatus::numerical_error ? -std::numeric_limits<double>::infinity() : om;
    };

    const int G = std::max(2, options.tau_grid);
    std::vector<double> grid(G), val(G);
    for (int i = 0; i < G; ++i) {
        grid[i] = hi * i / (G - 1);
        val[i] = eval(grid[i]);
    }
    const int i_best = static_cast<int>(std::max_element(val.begin(), val.end()) - val.begin());
    double a = grid[std::max(0, i_best - 1)], b = grid[std::min(G - 1, i_best + 1)];
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double f1 = eval(x1), f2 = eval(x2);
    for (int it = 0; it < options.golden_iters; ++it) {
        if (f1 >= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = eval(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = eval(x2);
        }
    }
    return best;
}

RVec sensing_values(const SdrProblem& problem, const std::vector<CMat>& W) {
    const int U = problem.n_users, M = problem.n_sub;
    if (static_cast<int>(W.size()) != M * U) throw ShapeError("sensing_values: W count");
    const SensingMats S = sensing_mats(problem);
    RVec out(M);
    for (int m = 0; m < M; ++m) {
        CMat Wm = CMat::Zero(problem.n_tx, problem.n_tx);
        for (int u = 0; u < U; ++u) Wm += W[static_cast<std::size_t>(m * U + u)];
        const double taa = (S.aa * Wm).trace().real();
        if (!(taa > 1e-300)) {
            out[m] = 0.0;
            continue;
        }
        const double tdd = (S.dd * Wm).trace().real();
        const cd tda((S.da_re * Wm).trace().real(), (S.da_im * Wm).trace().real());
        out[m] = problem.sense_scale[m] * std::max(0.0, tdd - std::norm(tda) / taa);
    }
    return out;
}

double ConstraintResiduals::max() const { return std::max({sinr, power, sensing, psd}); }

ConstraintResiduals constraint_residuals(const SdrProblem& problem, const std::vector<CMat>& W,
                                         double tau, double zeta) {
    const int U = problem.n_users, M = problem.n_sub;
    if (static_cast<int>(W.size()) != M * U) throw ShapeError("constraint_residuals: W count");
    ConstraintResiduals r;
    if (tau > 0.0)
        for (int m = 0; m < M; ++m)
            for (int u = 0; u < U; ++u) {
                double signal = 0.0, interf = 0.0;
                for (int k = 0; k < M; ++k) {
                    const CVec g = problem.channel_vector(m, k, u);
                    for (int i = 0; i < U; ++i) {
                        const double q = g.dot(W[static_cast<std::size_t>(k * U + i)] * g).real();
                        if (k == m && i == u) signal = q;
                        else interf += q;
                    }
                }
                const double need = tau * (interf + problem.noise_term);
                r.sinr = std::max(r.sinr, std::max(0.0, need - signal) / need);
            }
    double trace = 0.0;
    for (const auto& w : W) {
        trace += w.trace().real();
        const CMat h = 0.5 * (w + w.adjoint());
        const double lmin = Eigen::SelfAdjointEigenSolver<CMat>(h, Eigen::EigenvaluesOnly).eigenvalues()[0];
        r.psd = std::max(r.psd, std::max(0.0, -lmin) / std::max(1.0, h.trace().real()));
    }
    r.power = std::max(0.0, trace - problem.power_budget) / std::max(1.0, problem.power_budget);
    if (zeta > 0.0) {
        const RVec j = sensing_values(problem, W);
        for (int m = 0; m < M; ++m) r.sensing = std::max(r.sensing, std::max(0.0, zeta - j[m]) / zeta);
    }
    return r;
}

CVec restore_rank1(const CMat& W, const CVec& g, double tol) {
    if (W.rows() != g.size() || W.cols() != g.size()) throw ShapeError("restore_rank1: shape");
    const CVec wg = W * g;
    const double q = g.dot(wg).real();
    if (!(q > tol)) throw SingularError("restore_rank1: h^H W h is not positive");
    return wg / std::sqrt(q);
}

std::vector<CVec> restore_rank1(const SdrProblem& problem, const std::vector<CMat>& W) {
    const int U = problem.n_users, M = problem.n_sub;
    if (static_cast<int>(W.size()) != M * U) throw ShapeError("restore_rank1: W count");
    std::vector<CVec> f;
    f.reserve(W.size());
    for (int m = 0; m < M; ++m)
        for (int u = 0; u < U; ++u) {
            const CMat& w = W[static_cast<std::size_t>(m * U + u)];
            const CVec g = problem.channel_vector(m, m, u);
            // Scale-aware threshold: a numerically zero beam restores to zero.
            const double tol = 1e-14 * std::max(1.0, w.norm()) * std::max(1.0, g.squaredNorm());
            if (g.dot(w * g).real() <= tol) f.push_back(CVec::Zero(problem.n_tx));
            else f.push_back(restore_rank1(w, g, 0.0));
        }
    return f;
}

std::vector<CMat> stack_precoders(const std::vector<CVec>& f, int n_sub, int n_users) {
    if (static_cast<int>(f.size()) != n_sub * n_users) throw ShapeError("stack_precoders: count");
    std::vector<CMat> F;
    for (int m = 0; m < n_sub; ++m) {
        CMat fm(f[0].size(), n_users);
        for (int u = 0; u < n_users; ++u) fm.col(u) = f[static_cast<std::size_t>(m * n_users + u)];
        F.push_back(fm);
    }
    return F;
}

Boundaries compute_boundaries(const SdrProblem& problem, const SdrOptions& options) {
    problem.validate();
    Boundaries b;
    b.tau_max = max_common_sinr(problem, options);
    b.se_bound = problem.n_users * problem.n_sub * std::log2(1.0 + b.tau_max);
    SdrProblem p0 = problem;
    p0.weights.psi = 0.0;
    const auto s = solve_inner_sdp(p0, 0.0, options);
    if (s.status == SdrStatus::numerical_error) throw NumericalError("compute_boundaries: sensing solve failed");
    b.fisher_bound = problem.n_sub * s.zeta;
    return b;
}

}  // namespace isac
