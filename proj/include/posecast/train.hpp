#pragma once

#include <functional>
#include <vector>

#include "posecast/checkpoint.hpp"
#include "posecast/pose.hpp"

namespace posecast {

struct TrainStepInfo {
    int epoch;
    int step;
    double loss;
    const MatrixXd* u_grid;        // null when training without a prior
    const MatrixXd* batch_y;       // ((B*T*J) x 3) targets, (b, t, j) rows
    const MatrixXd* batch_y_hat;   // same layout, predictions
    int batch_size;
};

struct TrainHooks {
    std::function<void(const TrainStepInfo&)> on_step;
};

// Jointly optimizes model weights and prior parameters with one Adam run on
// the pUAL objective (plain summed L2 when no prior is configured). Single
// threaded and bitwise reproducible given the seed.
Checkpoint train(ForecasterKind kind, const std::vector<ForecastSample>& dataset,
                 const TrainConfig& cfg, const TrainHooks* hooks = nullptr);

// The 10% validation split used by train(): samples whose source_id hashes
// to 0 mod 10.
bool is_validation_sample(const ForecastSample& s);

}  // namespace posecast
