// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "isac/common.hpp"

namespace isac::sdp {

/// Block SDP in standard form over Hermitian PSD blocks (1x1 blocks are nonnegative scalars):
///
///   minimize  sum_k <C_k, X_k>   s.t.  sum_k <A_ik, X_k> = b_i,  X_k >= 0.
///
/// Every A_ik is stored factored as V diag(w) V^H, which keeps the Schur complement cheap
/// when constraints are low rank on each block.
struct Entry {
    int row = 0;
    CMat V;
    RVec w;
};

struct Problem {
    std::vector<int> block_sizes;
    std::vector<std::vector<Entry>> entries;  // per block
    std::vector<CMat> C;                      // per block; an empty matrix means zero
    RVec b;

    int add_block(int n);
    void add_entry(int block, int row, CMat V, RVec w);
    /// Rank-one entry coeff * v v^H.
    void add_rank1(int block, int row, const CVec& v, double coeff);
    /// Dense Hermitian entry, factored by eigendecomposition.
    void add_dense(int block, int row, const CMat& A);
    int n_rows() const { return static_cast<int>(b.size()); }
};

enum class Status { optimal, max_iterations, numerical_error };

const char* to_string(Status s);

struct Options {
    double tol = 1e-8;
    int max_iter = 100;
    /// Receives one JSON object per iteration when set.
    std::function<void(const std::string&)> trace;
};

struct Result {
    Status status = Status::numerical_error;
    std::vector<CMat> X;
    std::vector<CMat> S;
    RVec y;
    double primal_obj = 0.0;
    double dual_obj = 0.0;
    double gap = 0.0;          // |pobj - dobj| / (1 + |pobj| + |dobj|)
    double primal_res = 0.0;   // ||b - A(X)|| / (1 + ||b||)
    double dual_res = 0.0;     // ||C - A^T y - S|| / (1 + ||C||)
    int iterations = 0;
};

Result solve(const Problem& problem, const Options& options = {});

/// sum_k <A_ik, X_k> for every row.
RVec apply_constraints(const Problem& problem, const std::vector<CMat>& X);

}  // namespace isac::sdp
