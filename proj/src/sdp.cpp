// SPDX-License-Identifier: Apache-2.0
// Infeasible-start primal-dual interior point method, HKM search direction with a Mehrotra
// predictor-corrector. Rows are equilibrated to unit Frobenius norm before the first iteration.
#include "isac/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"

namespace isac::sdp {

int Problem::add_block(int n) {
    if (n <= 0) throw InvalidArgument("sdp block size must be positive");
    block_sizes.push_back(n);
    entries.emplace_back();
    C.emplace_back();
    return static_cast<int>(block_sizes.size()) - 1;
}

void Problem::add_entry(int block, int row, CMat V, RVec w) {
    if (block < 0 || block >= static_cast<int>(block_sizes.size()))
        throw InvalidArgument("sdp block index out of range");
    if (row < 0 || row >= n_rows()) throw InvalidArgument("sdp row index out of range");
    if (V.rows() != block_sizes[block] || V.cols() != w.size())
        throw ShapeError("sdp factor shape does not match block");
    if (w.size() == 0) return;
    entries[block].push_back({row, std::move(V), std::move(w)});
}

void Problem::add_rank1(int block, int row, const CVec& v, double coeff) {
    if (coeff == 0.0) return;
    RVec w(1);
    w[0] = coeff;
    add_entry(block, row, CMat(v), w);
}

void Problem::add_dense(int block, int row, const CMat& A) {
    Eigen::SelfAdjointEigenSolver<CMat> es(A);
    const RVec& ev = es.eigenvalues();
    const double scale = ev.cwiseAbs().maxCoeff();
    if (scale == 0.0) return;
    std::vector<int> keep;
    for (int i = 0; i < ev.size(); ++i)
        if (std::abs(ev[i]) > 1e-13 * scale) keep.push_back(i);
    CMat V(A.rows(), static_cast<Eigen::Index>(keep.size()));
    RVec w(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j) {
        V.col(j) = es.eigenvectors().col(keep[j]);
        w[j] = ev[keep[j]];
    }
    add_entry(block, row, std::move(V), std::move(w));
}

const char* to_string(Status s) {
    switch (s) {
        case Status::optimal: return "optimal";
        case Status::max_iterations: return "max_iterations";
        case Status::numerical_error: return "numerical_error";
    }
    return "unknown";
}

namespace {

// Per-block concatenation of all factors: A_ik = sum over columns r with rows[r] == i of
// w[r] v_r v_r^H.
struct BlockData {
    int n = 0;
    CMat V;
    RVec w;
    std::vector<int> rows;
    CMat C;
};

std::vector<BlockData> gather(const Problem& p, const RVec& row_scale) {
    std::vector<BlockData> out(p.block_sizes.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        auto& bd = out[k];
        bd.n = p.block_sizes[k];
        Eigen::Index cols = 0;
        for (const auto& e : p.entries[k]) cols += e.V.cols();
        bd.V.resize(bd.n, cols);
        bd.w.resize(cols);
        bd.rows.resize(static_cast<std::size_t>(cols));
        Eigen::Index c = 0;
        for (const auto& e : p.entries[k]) {
            const Eigen::Index r = e.V.cols();
            bd.V.middleCols(c, r) = e.V;
            bd.w.segment(c, r) = e.w / row_scale[e.row];
            for (Eigen::Index j = 0; j < r; ++j) bd.rows[static_cast<std::size_t>(c + j)] = e.row;
            c += r;
        }
        bd.C = p.C[k].size() == 0 ? CMat::Zero(bd.n, bd.n) : p.C[k];
        if (bd.C.rows() != bd.n || bd.C.cols() != bd.n) throw ShapeError("sdp objective block shape");
    }
    return out;
}

// Frobenius norm of each row's constraint matrix, over all blocks.
RVec row_norms(const Problem& p) {
    RVec sq = RVec::Zero(p.n_rows());
    for (std::size_t k = 0; k < p.entries.size(); ++k) {
        // Entries of one row within one block are summed before taking the norm.
        std::vector<CMat> dense(static_cast<std::size_t>(p.n_rows()));
        for (const auto& e : p.entries[k]) {
            CMat A = e.V * e.w.asDiagonal() * e.V.adjoint();
            auto& d = dense[static_cast<std::size_t>(e.row)];
            if (d.size() == 0) d = A;
            else d += A;
        }
        for (int i = 0; i < p.n_rows(); ++i)
            if (dense[static_cast<std::size_t>(i)].size() != 0)
                sq[i] += dense[static_cast<std::size_t>(i)].squaredNorm();
    }
    return sq.cwiseSqrt();
}

// Real part of Tr(A_i Y) accumulated into out; Y need not be Hermitian.
void apply_block(const BlockData& bd, const CMat& Y, RVec& out) {
    if (bd.V.cols() == 0) return;
    const CMat P = Y * bd.V;
    for (Eigen::Index r = 0; r < bd.V.cols(); ++r)
        out[bd.rows[static_cast<std::size_t>(r)]] += bd.w[r] * bd.V.col(r).dot(P.col(r)).real();
}

CMat adjoint_block(const BlockData& bd, const RVec& y) {
    if (bd.V.cols() == 0) return CMat::Zero(bd.n, bd.n);
    RVec d(bd.V.cols());
    for (Eigen::Index r = 0; r < d.size(); ++r) d[r] = bd.w[r] * y[bd.rows[static_cast<std::size_t>(r)]];
    return bd.V * d.asDiagonal() * bd.V.adjoint();
}

double inner(const CMat& A, const CMat& B) { return (A.adjoint() * B).trace().real(); }

CMat herm(const CMat& A) { return 0.5 * (A + A.adjoint()); }

// Largest alpha in (0, inf] with X + alpha dX PSD; X must be positive definite.
double max_step(const CMat& X, const CMat& dX) {
    if (X.rows() == 1) {
        const double d = dX(0, 0).real();
        return d < 0.0 ? -X(0, 0).real() / d : std::numeric_limits<double>::infinity();
    }
    Eigen::LLT<CMat> llt(X);
    if (llt.info() != Eigen::Success) return 0.0;
    const CMat Linv = llt.matrixL().solve(CMat::Identity(X.rows(), X.cols()));
    const CMat T = herm(Linv * dX * Linv.adjoint());
    const double lmin = Eigen::SelfAdjointEigenSolver<CMat>(T, Eigen::EigenvaluesOnly).eigenvalues()[0];
    return lmin < 0.0 ? -1.0 / lmin : std::numeric_limits<double>::infinity();
}

bool inverse_pd(const CMat& S, CMat& out) {
    if (S.rows() == 1) {
        const double s = S(0, 0).real();
        if (!(s > 0.0)) return false;
        out = CMat::Constant(1, 1, 1.0 / s);
        return true;
    }
    Eigen::LLT<CMat> llt(S);
    if (llt.info() != Eigen::Success) return false;
    out = llt.solve(CMat::Identity(S.rows(), S.cols()));
    out = herm(out);
    return true;
}

}  // namespace

RVec apply_constraints(const Problem& problem, const std::vector<CMat>& X) {
    const RVec ones = RVec::Ones(problem.n_rows());
    const auto blocks = gather(problem, ones);
    RVec out = RVec::Zero(problem.n_rows());
    for (std::size_t k = 0; k < blocks.size(); ++k) apply_block(blocks[k], X[k], out);
    return out;
}

Result solve(const Problem& problem, const Options& options) {
    const int m = problem.n_rows();
    const std::size_t nb = problem.block_sizes.size();
    if (problem.entries.size() != nb || problem.C.size() != nb)
        throw ShapeError("sdp problem block lists disagree");

    RVec scale = row_norms(problem);
    for (int i = 0; i < m; ++i)
        if (!(scale[i] > 0.0)) throw InvalidArgument("sdp constraint row " + std::to_string(i) + " is empty");
    const RVec b = problem.b.cwiseQuotient(scale);
    const auto blocks = gather(problem, scale);

    int n_total = 0;
    double c_norm = 0.0;
    for (const auto& bd : blocks) {
        n_total += bd.n;
        c_norm += bd.C.squaredNorm();
    }
    c_norm = std::sqrt(c_norm);
    const double b_norm = b.norm();

    // Starting point scaled to the data.
    std::vector<CMat> X(nb), S(nb), Sinv(nb);
    for (std::size_t k = 0; k < nb; ++k) {
        const auto& bd = blocks[k];
        RVec a_norm = RVec::Zero(m);
        {
            std::vector<CMat> dense(static_cast<std::size_t>(m));
            for (Eigen::Index r = 0; r < bd.V.cols(); ++r) {
                auto& d = dense[static_cast<std::size_t>(bd.rows[static_cast<std::size_t>(r)])];
                CMat t = bd.w[r] * bd.V.col(r) * bd.V.col(r).adjoint();
                if (d.size() == 0) d = t;
                else d += t;
            }
            for (int i = 0; i < m; ++i)
                if (dense[static_cast<std::size_t>(i)].size() != 0) a_norm[i] = dense[static_cast<std::size_t>(i)].norm();
        }
        const double sn = std::sqrt(static_cast<double>(bd.n));
        double xi = std::max(10.0, sn), eta = std::max(10.0, sn);
        for (int i = 0; i < m; ++i) {
            if (a_norm[i] == 0.0) continue;
            xi = std::max(xi, bd.n * (1.0 + std::abs(b[i])) / (1.0 + a_norm[i]));
            eta = std::max(eta, a_norm[i]);
        }
        eta = std::max(eta, bd.C.norm());
        X[k] = xi * CMat::Identity(bd.n, bd.n);
        S[k] = eta * CMat::Identity(bd.n, bd.n);
    }
    RVec y = RVec::Zero(m);

    Result res;
    res.status = Status::max_iterations;
    int stalls = 0;

    for (int it = 0; it <= options.max_iter; ++it) {
        RVec ax = RVec::Zero(m);
        for (std::size_t k = 0; k < nb; ++k) apply_block(blocks[k], X[k], ax);
        const RVec rp = b - ax;
        std::vector<CMat> Rd(nb);
        double pobj = 0.0, dinf_sq = 0.0, xs = 0.0;
        for (std::size_t k = 0; k < nb; ++k) {
            Rd[k] = blocks[k].C - adjoint_block(blocks[k], y) - S[k];
            dinf_sq += Rd[k].squaredNorm();
            pobj += inner(blocks[k].C, X[k]);
            xs += inner(X[k], S[k]);
        }
        const double dobj = b.dot(y);
        const double denom = 1.0 + std::abs(pobj) + std::abs(dobj);
        res.gap = std::max(std::abs(pobj - dobj), std::abs(xs)) / denom;
        res.primal_res = rp.norm() / (1.0 + b_norm);
        res.dual_res = std::sqrt(dinf_sq) / (1.0 + c_norm);
        res.primal_obj = pobj;
        res.dual_obj = dobj;
        res.iterations = it;
        const double mu = xs / n_total;

        if (res.gap < options.tol && res.primal_res < options.tol && res.dual_res < options.tol) {
            res.status = Status::optimal;
            break;
        }
        if (it == options.max_iter) break;
        if (!std::isfinite(pobj) || !std::isfinite(dobj) || y.norm() > 1e15 || std::abs(pobj) > 1e15) {
            res.status = Status::numerical_error;
            break;
        }

        bool ok = true;
        for (std::size_t k = 0; k < nb && ok; ++k) ok = inverse_pd(S[k], Sinv[k]);
        if (!ok) {
            res.status = Status::numerical_error;
            break;
        }

        // Schur complement M_ij = sum_k Re Tr(A_ik X_k A_jk S_k^{-1}).
        RMat Msc = RMat::Zero(m, m);
        for (std::size_t k = 0; k < nb; ++k) {
            const auto& bd = blocks[k];
            const Eigen::Index R = bd.V.cols();
            if (R == 0) continue;
            const CMat G1 = bd.V.adjoint() * X[k] * bd.V;
            const CMat G2 = bd.V.adjoint() * Sinv[k] * bd.V;
            for (Eigen::Index q = 0; q < R; ++q) {
                const int rq = bd.rows[static_cast<std::size_t>(q)];
                for (Eigen::Index r = 0; r < R; ++r) {
                    const cd g1 = G1(r, q), g2 = G2(r, q);
                    Msc(bd.rows[static_cast<std::size_t>(r)], rq) +=
                        bd.w[r] * bd.w[q] * (g1.real() * g2.real() + g1.imag() * g2.imag());
                }
            }
        }
        Msc = 0.5 * (Msc + Msc.transpose());
        Eigen::LLT<RMat> chol(Msc);
        Eigen::LDLT<RMat> ldlt;
        const bool use_llt = chol.info() == Eigen::Success;
        if (!use_llt) {
            RMat reg = Msc;
            reg.diagonal().array() += 1e-14 * std::max(1.0, Msc.diagonal().maxCoeff());
            ldlt.compute(reg);
            if (ldlt.info() != Eigen::Success) {
                res.status = Status::numerical_error;
                break;
            }
        }
        auto solve_schur = [&](const RVec& r) -> RVec { return use_llt ? RVec(chol.solve(r)) : RVec(ldlt.solve(r)); };

        std::vector<CMat> XRdSinv(nb);
        for (std::size_t k = 0; k < nb; ++k) XRdSinv[k] = X[k] * Rd[k] * Sinv[k];

        auto direction = [&](double mu_t, const std::vector<CMat>* corr, std::vector<CMat>& dX, RVec& dy,
                             std::vector<CMat>& dS) {
            std::vector<CMat> Rc(nb);
            RVec at = RVec::Zero(m);
            for (std::size_t k = 0; k < nb; ++k) {
                Rc[k] = mu_t * Sinv[k] - X[k];
                if (corr) Rc[k] -= (*corr)[k];
                apply_block(blocks[k], CMat(Rc[k] - XRdSinv[k]), at);
            }
            dy = solve_schur(rp - at);
            dX.resize(nb);
            dS.resize(nb);
            for (std::size_t k = 0; k < nb; ++k) {
                dS[k] = herm(Rd[k] - adjoint_block(blocks[k], dy));
                dX[k] = herm(Rc[k] - X[k] * dS[k] * Sinv[k]);
            }
        };
        auto steps = [&](const std::vector<CMat>& dX, const std::vector<CMat>& dS) {
            double ap = std::numeric_limits<double>::infinity(), ad = ap;
            for (std::size_t k = 0; k < nb; ++k) {
                ap = std::min(ap, max_step(X[k], dX[k]));
                ad = std::min(ad, max_step(S[k], dS[k]));
            }
            return std::pair<double, double>(ap, ad);
        };

        std::vector<CMat> dXa, dSa;
        RVec dya;
        direction(0.0, nullptr, dXa, dya, dSa);
        auto [apa, ada] = steps(dXa, dSa);
        apa = std::min(1.0, apa);
        ada = std::min(1.0, ada);
        double xs_aff = 0.0;
        for (std::size_t k = 0; k < nb; ++k) xs_aff += inner(X[k] + apa * dXa[k], S[k] + ada * dSa[k]);
        double sigma = std::pow(std::max(0.0, xs_aff) / std::max(xs, 1e-300), 3.0);
        sigma = std::clamp(sigma, 0.0, 1.0);

        std::vector<CMat> corr(nb);
        for (std::size_t k = 0; k < nb; ++k) corr[k] = dXa[k] * dSa[k] * Sinv[k];
        std::vector<CMat> dX, dS;
        RVec dy;
        direction(sigma * mu, &corr, dX, dy, dS);
        auto [ap, ad] = steps(dX, dS);
        const double gamma = 0.9 + 0.09 * std::min(apa, ada);
        ap = std::min(1.0, gamma * ap);
        ad = std::min(1.0, gamma * ad);

        if (options.trace) {
            nlohmann::json j{{"iter", it},     {"pobj", pobj},         {"dobj", dobj},
                             {"gap", res.gap}, {"pinf", res.primal_res}, {"dinf", res.dual_res},
                             {"mu", mu},       {"sigma", sigma},       {"step_p", ap},
                             {"step_d", ad}};
            options.trace(j.dump());
        }

        stalls = (ap < 1e-10 && ad < 1e-10) ? stalls + 1 : 0;
        if (stalls >= 3 || !(ap > 0.0) || !(ad > 0.0)) {
            res.status = Status::numerical_error;
            break;
        }
        for (std::size_t k = 0; k < nb; ++k) {
            X[k] = herm(X[k] + ap * dX[k]);
            S[k] = herm(S[k] + ad * dS[k]);
        }
        y += ad * dy;
    }

    res.X = std::move(X);
    res.S = std::move(S);
    res.y = y.cwiseQuotient(scale);
    return res;
}

}  // namespace isac::sdp
