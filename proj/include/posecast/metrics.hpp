#pragma once

#include <functional>
#include <vector>

#include "posecast/pose.hpp"
#include "posecast/tensor.hpp"

namespace posecast {

// Per-frame MPJPE in mm: frame t value = (1/J) sum_j ||y_t^j - y_hat_t^j||.
VectorXd mpjpe(const MotionMatrix& y, const MotionMatrix& y_hat);

// Mean of mpjpe over frames.
double a_mpjpe(const MotionMatrix& y, const MotionMatrix& y_hat);

// Average over samples and unordered run pairs (r < s) of a_mpjpe between the
// two runs' predictions. predictions[run][sample] is a (T x 3J) tensor.
double ap_mpjpe(const std::vector<std::vector<MotionMatrix>>& predictions);

// Probability that a random positive outranks a random negative; ties 0.5.
double auroc(const std::vector<double>& scores_negative, const std::vector<double>& scores_positive);

struct RocPoint {
    double threshold;
    double fpr;
    double tpr;
};

// Full ROC point list (score >= threshold classified positive), threshold
// descending from +inf.
std::vector<RocPoint> roc_points(const std::vector<double>& scores_negative,
                                 const std::vector<double>& scores_positive);

struct HorizonTable {
    std::vector<double> horizons_ms;
    std::vector<double> mpjpe_mm;
    int num_samples = 0;
};

using ForecastFn = std::function<MotionMatrix(const ForecastSample&)>;

// MPJPE at each requested horizon, averaged over samples. Horizons must be
// multiples of the frame period 1000/fps; frame index = round(h*fps/1000),
// 1-based.
HorizonTable horizon_table(const std::vector<ForecastSample>& samples, const ForecastFn& forecaster,
                           const std::vector<double>& horizons_ms, double fps);

int horizon_frame_index(double horizon_ms, double fps, int max_frames);

}  // namespace posecast
