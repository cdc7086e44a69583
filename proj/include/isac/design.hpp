// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <vector>

#include "isac/hybrid.hpp"
#include "isac/sdr.hpp"

namespace isac {

struct DesignResult {
    HybridPrecoder precoder;       // quantized, unit power
    std::vector<CMat> digital_fd;  // rank-1 restored fully-digital precoders, one per subcarrier
    SdrSolution sdr;
    Boundaries bounds;
    double decomposition_residual = 0.0;
};

/// Full optimization-based design for one snapshot: boundaries, SDR outer search, rank-one
/// restoration and alternating hybrid decomposition. `bounds` skips the boundary solves.
/// Throws NumericalError when the SDR solver fails without a usable iterate.
DesignResult optimize_precoder(const IciBlocks& channel, double theta, const std::vector<cd>& alpha,
                               const SystemConfig& config, double psi, const SdrOptions& options = {},
                               std::optional<Boundaries> bounds = std::nullopt);

}  // namespace isac
