// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace isac {

using cd = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;

inline constexpr double kPi = 3.14159265358979323846;

enum class ErrorCode : int {
    invalid_argument = 1,
    config = 2,
    io = 3,
    infeasible = 4,
    numerical = 5,
    state = 6,
    not_found = 7,
    range_underflow = 8,
    singular = 9,
    shape = 10,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

#define ISAC_DEFINE_ERROR(Name, Code)                                              \
    class Name : public Error {                                                    \
    public:                                                                        \
        explicit Name(const std::string& what) : Error(ErrorCode::Code, what) {} \
    }

ISAC_DEFINE_ERROR(InvalidArgument, invalid_argument);
ISAC_DEFINE_ERROR(ConfigError, config);
ISAC_DEFINE_ERROR(IoError, io);
ISAC_DEFINE_ERROR(InfeasibleError, infeasible);
ISAC_DEFINE_ERROR(NumericalError, numerical);
ISAC_DEFINE_ERROR(StateError, state);
ISAC_DEFINE_ERROR(NotFoundError, not_found);
ISAC_DEFINE_ERROR(RangeUnderflow, range_underflow);
ISAC_DEFINE_ERROR(SingularError, singular);
ISAC_DEFINE_ERROR(ShapeError, shape);

#undef ISAC_DEFINE_ERROR

using Rng = std::mt19937_64;

// SplitMix64 finalizer; derives decorrelated child seeds from (seed, stream).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Circularly-symmetric complex Gaussian with E|z|^2 = variance.
inline cd complex_normal(Rng& rng, double variance) {
    std::normal_distribution<double> n(0.0, std::sqrt(variance / 2.0));
    double re = n(rng);
    double im = n(rng);
    return {re, im};
}

inline double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

}  // namespace isac
