// SPDX-License-Identifier: Apache-2.0
#include "isac/design.hpp"

namespace isac {

DesignResult optimize_precoder(const IciBlocks& channel, double theta, const std::vector<cd>& alpha,
                               const SystemConfig& config, double psi, const SdrOptions& options,
                               std::optional<Boundaries> bounds) {
    DesignResult out;
    SdrProblem p = make_sdr_problem(channel, theta, alpha, config, UtilityWeights{psi, 1.0, 1.0});
    out.bounds = bounds ? *bounds : compute_boundaries(p, options);
    p.weights.se_bound = out.bounds.se_bound > 0.0 ? out.bounds.se_bound : 1.0;
    p.weights.fisher_bound = out.bounds.fisher_bound > 0.0 ? out.bounds.fisher_bound : 1.0;
    out.sdr = solve_digital_sdr(p, options, out.bounds.tau_max);
    // max_iterations still leaves a feasible-within-tolerance iterate worth decomposing.
    if (out.sdr.status == SdrStatus::numerical_error || out.sdr.status == SdrStatus::infeasible ||
        out.sdr.W.empty())
        throw NumericalError(std::string("optimize_precoder: SDR ") + to_string(out.sdr.status));
    out.digital_fd = stack_precoders(restore_rank1(p, out.sdr.W), config.n_sub, config.n_users);
    const Decomposition d = alternating_decompose(out.digital_fd, config.opt_decomp_iters, config.phase_bits);
    out.precoder = d.precoder;
    out.decomposition_residual = d.final_residual;
    return out;
}

}  // namespace isac
