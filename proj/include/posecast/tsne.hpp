#pragma once

#include <cstdint>

#include "posecast/tensor.hpp"

namespace posecast {

// 2-D reduction interface; the K estimator takes any implementation.
class Reducer2D {
public:
    virtual ~Reducer2D() = default;
    virtual MatrixXd reduce(const MatrixXd& points, std::uint64_t seed) const = 0;
};

struct TsneOptions {
    double perplexity = 30.0;
    int iterations = 500;
    double learning_rate = 200.0;
    double early_exaggeration = 12.0;
    int exaggeration_iters = 120;
    double initial_momentum = 0.5;
    double final_momentum = 0.8;
    int momentum_switch = 250;
    bool pca_init = true;      // deterministic global-structure init
    double init_jitter = 1e-6; // seeded symmetry breaking
};

// Exact (O(N^2)) neighbor embedding. Input distances are normalized by their
// mean before the perplexity calibration, so the embedding is invariant to
// global translation and uniform scaling of the input.
class TsneReducer : public Reducer2D {
public:
    TsneReducer() = default;
    explicit TsneReducer(TsneOptions opts) : opts_(opts) {}
    MatrixXd reduce(const MatrixXd& points, std::uint64_t seed) const override;

private:
    TsneOptions opts_;
};

// Top-2 principal components; deterministic, used for t-SNE init and as a
// cheap alternative reducer.
MatrixXd pca_2d(const MatrixXd& points);

}  // namespace posecast
