#pragma once

#include <cstdint>
#include <vector>

#include "posecast/tsne.hpp"

namespace posecast {

// Density-peaks statistics over a 2-D embedding.
struct DensityStats {
    MatrixXd embedding_2d;  // (N x 2)
    VectorXi rho;           // neighbors within d_c (self excluded)
    VectorXd delta;         // distance to the nearest higher-density point
    VectorXd gamma;         // normalized rho * normalized delta, per point
    double d_c = 0.0;
};

struct KEstimateConfig {
    int k_max_cap = 32;
    double dc_quantile = 0.02;  // cut-off distance quantile of pairwise distances
    double epsilon = 1e-12;     // guards the gamma-ratio division
    TsneOptions tsne;
};

struct KEstimate {
    int k = 1;
    DensityStats stats;
    VectorXd gamma_sorted;  // descending
    VectorXd r;             // r[i] = gamma[i] / (gamma[i+1] + eps), first k_max entries
};

// rho/delta/gamma on an already 2-D embedding (exposed for testing).
DensityStats density_stats(const MatrixXd& embedding_2d, double dc_quantile);

// Same with an explicit cut-off distance.
DensityStats density_stats_with_dc(const MatrixXd& embedding_2d, double d_c);

// Reduce to 2-D, compute density peaks, pick K at the largest gamma-ratio
// gap within [1, k_max].
KEstimate estimate_k(const MatrixXd& embeddings, const KEstimateConfig& cfg, std::uint64_t seed,
                     const Reducer2D* reducer = nullptr);

int k_max_for(int n, int cap);

}  // namespace posecast
