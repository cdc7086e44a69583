// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "isac/channel.hpp"
#include "isac/config.hpp"
#include "isac/metrics.hpp"

namespace isac {

/// Relaxed fully-digital design problem for one channel snapshot. W_{m,u} = f_{m,u} f_{m,u}^H in
/// the normalized precoder domain (sum of traces equals the power budget).
struct SdrProblem {
    int n_tx = 0;
    int n_users = 0;
    int n_sub = 0;
    IciBlocks channel;
    double noise_term = 1.0;   // N_t U M sigma_c^2 / P_t
    CMat A;                    // a_r a_t^H, N_r x N_t
    CMat dA;                   // dA / dtheta
    RVec sense_scale;          // c_m: J_m(W) = c_m (t_dd - |t_da|^2 / t_aa)
    UtilityWeights weights;
    double power_budget = 1.0;

    /// Column vector g with g^H W g = |h_{m,k,u} f|^2 for W = f f^H.
    CVec channel_vector(int m, int k, int u) const;
    /// Q_{m,k,u} = h^H h.
    CMat gram(int m, int k, int u) const;
    void validate() const;
};

SdrProblem make_sdr_problem(const IciBlocks& channel, double theta, const std::vector<cd>& alpha,
                            const SystemConfig& config, const UtilityWeights& weights);

enum class SdrStatus { optimal, infeasible, max_iterations, numerical_error };

const char* to_string(SdrStatus s);

struct SdrOptions {
    double tol = 1e-8;
    int max_iter = 100;
    int tau_grid = 32;
    int golden_iters = 24;
    /// The outer search stays below (1 - margin) times the largest attainable common SINR.
    double tau_margin = 1e-3;
    /// Receives JSON lines (solver iterations and outer-search evaluations) when set.
    std::function<void(const std::string&)> trace;
};

struct SdrSolution {
    std::vector<CMat> W;  // index m * U + u
    double tau = 0.0;
    double zeta = 0.0;    // common per-subcarrier Fisher floor
    double omega = 0.0;
    SdrStatus status = SdrStatus::numerical_error;
    double gap = 0.0;
    int iterations = 0;

    bool ok() const { return status == SdrStatus::optimal; }
    const CMat& w(int m, int u, int n_users) const { return W[static_cast<std::size_t>(m * n_users + u)]; }
};

/// Maximizes the common Fisher floor at a fixed SINR target tau.
SdrSolution solve_inner_sdp(const SdrProblem& problem, double tau, const SdrOptions& options = {});

/// Optimal value of max t s.t. signal - tau (interference + noise) >= t for all (m, u), power
/// within budget. Nonnegative exactly when tau is attainable.
double sinr_margin(const SdrProblem& problem, double tau, const SdrOptions& options = {});

/// Largest attainable common SINR target (root of sinr_margin).
double max_common_sinr(const SdrProblem& problem, const SdrOptions& options = {});

/// omega = psi U M log2(1 + tau) / R* + (1 - psi) M zeta / J*.
double sdr_objective(const SdrProblem& problem, double tau, double zeta);

/// Outer search over tau around solve_inner_sdp. tau_max, when given, skips max_common_sinr.
SdrSolution solve_digital_sdr(const SdrProblem& problem, const SdrOptions& options = {},
                              std::optional<double> tau_max = std::nullopt);

/// Per-subcarrier Fisher information J_m of sum_u W_{m,u}.
RVec sensing_values(const SdrProblem& problem, const std::vector<CMat>& W);

struct ConstraintResiduals {
    double sinr = 0.0;     // max over (m,u) of (tau (I + N) - S)_+ / (tau (I + N))
    double power = 0.0;    // (sum Tr W - P)_+ / max(P, 1)
    double sensing = 0.0;  // max over m of (zeta - J_m)_+ / max(zeta, tiny)
    double psd = 0.0;      // max over W of (-lambda_min)_+ / max(Tr W, 1)
    double max() const;
};

ConstraintResiduals constraint_residuals(const SdrProblem& problem, const std::vector<CMat>& W,
                                         double tau, double zeta);

/// f = (g^H W g)^{-1/2} W g for the user's own channel vector g.
CVec restore_rank1(const CMat& W, const CVec& g, double tol = 1e-12);

/// Applies restore_rank1 to every (m, u) with g = h_{m,m,u}^H. Returns f_{m,u} at index m U + u.
std::vector<CVec> restore_rank1(const SdrProblem& problem, const std::vector<CMat>& W);

/// Stacks vectors f_{m,u} into per-subcarrier N_t x U precoders.
std::vector<CMat> stack_precoders(const std::vector<CVec>& f, int n_sub, int n_users);

struct Boundaries {
    double se_bound = 0.0;      // R* = U M log2(1 + tau_max)
    double fisher_bound = 0.0;  // J* = M zeta at tau = 0
    double tau_max = 0.0;
};

Boundaries compute_boundaries(const SdrProblem& problem, const SdrOptions& options = {});

}  // namespace isac
