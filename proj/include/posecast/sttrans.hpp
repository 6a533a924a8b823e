#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "posecast/nn.hpp"
#include "posecast/pose.hpp"
#include "posecast/tensor.hpp"

namespace posecast {

struct ForecastOutput {
    MotionMatrix y_hat;        // (T x 3J) mm
    std::optional<MatrixXd> u; // (T x J), present iff trained with a prior
};

// Repeats the last observed pose for all future frames.
ForecastOutput zero_vel_forecast(const FrameMatrix& observed, int horizon);
ForecastOutput zero_vel_forecast(const MotionMatrix& observed, int horizon);

struct STTransConfig {
    int num_blocks = 6;
    int model_width = 64;
    int num_heads = 4;
    int mlp_hidden = 128;
    double dropout_rate = 0.1;

    void validate() const;
    bool operator==(const STTransConfig&) const = default;
};

// Residual blocks of cascaded temporal attention (tokens = frames, per joint)
// and spatial attention (tokens = joints, per frame), between an input MLP
// that embeds per-joint-per-frame coordinates and an output MLP decoding the
// future tokens. Inputs are centered on the last observed pose, so the model
// predicts a residual motion in units of kPoseScale millimeters.
class STTransModel {
public:
    static constexpr double kPoseScale = 100.0;

    STTransModel() = default;
    STTransModel(const STTransConfig& cfg, int observed, int horizon, int joints, std::uint64_t seed);

    // observed_batch is (B x O*3J) mm; returns predictions ((B*T*J) x 3) mm
    // laid out (b, t, j) with j fastest.
    nn::Var forward(nn::Ctx& ctx, const MotionMatrix& observed_batch) const;

    // Deterministic single-sample inference.
    MotionMatrix forecast(const FrameMatrix& observed) const;
    MotionMatrix forecast(const MotionMatrix& observed) const;
    // Stochastic forward with dropout active (one Monte-Carlo pass).
    MotionMatrix forecast_stochastic(const MotionMatrix& observed, Rng& dropout_rng) const;

    std::vector<nn::Param*> params();
    std::vector<const nn::Param*> params() const;

    const STTransConfig& config() const { return cfg_; }
    int observed_frames() const { return observed_; }
    int horizon() const { return horizon_; }
    int joints() const { return joints_; }

private:
    struct Block {
        nn::LayerNorm ln_temporal, ln_spatial, ln_ff;
        nn::Linear q_t, k_t, v_t, o_t;
        nn::Linear q_s, k_s, v_s, o_s;
        nn::Linear ff1, ff2;
    };

    MotionMatrix forecast_impl(const MotionMatrix& observed, bool train_mode, Rng* dropout_rng) const;

    STTransConfig cfg_;
    int observed_ = 0, horizon_ = 0, joints_ = 0;
    nn::Linear embed_;
    nn::Param frame_pos_;  // (O+T) x W
    nn::Param joint_pos_;  // J x W
    std::vector<Block> blocks_;
    nn::LayerNorm final_ln_;
    nn::Linear decode_;
};

}  // namespace posecast
