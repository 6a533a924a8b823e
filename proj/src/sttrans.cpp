#include "posecast/sttrans.hpp"

#include "posecast/error.hpp"

namespace posecast {

ForecastOutput zero_vel_forecast(const MotionMatrix& observed, int horizon) {
    if (observed.rows() < 1) throw Error::validation("zero_vel: needs at least one observed frame");
    if (horizon < 1) throw Error::validation("zero_vel: horizon must be >= 1");
    ForecastOutput out;
    out.y_hat = observed.row(observed.rows() - 1).replicate(horizon, 1);
    return out;
}

ForecastOutput zero_vel_forecast(const FrameMatrix& observed, int horizon) {
    return zero_vel_forecast(to_double(observed), horizon);
}

void STTransConfig::validate() const {
    if (num_blocks < 1 || model_width < 1 || num_heads < 1 || mlp_hidden < 1) {
        throw Error::validation("st_trans: config values must be positive");
    }
    if (model_width % num_heads != 0) {
        throw Error::validation("st_trans: model_width must be divisible by num_heads");
    }
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
        throw Error::validation("st_trans: dropout_rate must be in [0, 1)");
    }
}

STTransModel::STTransModel(const STTransConfig& cfg, int observed, int horizon, int joints,
                           std::uint64_t seed)
    : cfg_(cfg), observed_(observed), horizon_(horizon), joints_(joints) {
    cfg.validate();
    if (observed < 1 || horizon < 1 || joints < 1) {
        throw Error::validation("st_trans: observed/horizon/joints must be >= 1");
    }
    Rng rng(seed);
    const int w = cfg_.model_width;
    embed_.init("embed", 3, w, rng);
    frame_pos_.init("frame_pos", 0.02 * nn::xavier_uniform(observed + horizon, w, rng));
    joint_pos_.init("joint_pos", 0.02 * nn::xavier_uniform(joints, w, rng));
    frame_pos_.snap();
    joint_pos_.snap();
    blocks_.resize(cfg_.num_blocks);
    for (int b = 0; b < cfg_.num_blocks; ++b) {
        const std::string p = "block" + std::to_string(b) + ".";
        Block& blk = blocks_[b];
        blk.ln_temporal.init(p + "ln_temporal", w);
        blk.ln_spatial.init(p + "ln_spatial", w);
        blk.ln_ff.init(p + "ln_ff", w);
        blk.q_t.init(p + "q_t", w, w, rng);
        blk.k_t.init(p + "k_t", w, w, rng);
        blk.v_t.init(p + "v_t", w, w, rng);
        blk.o_t.init(p + "o_t", w, w, rng);
        blk.q_s.init(p + "q_s", w, w, rng);
        blk.k_s.init(p + "k_s", w, w, rng);
        blk.v_s.init(p + "v_s", w, w, rng);
        blk.o_s.init(p + "o_s", w, w, rng);
        blk.ff1.init(p + "ff1", w, cfg_.mlp_hidden, rng);
        blk.ff2.init(p + "ff2", cfg_.mlp_hidden, w, rng);
    }
    final_ln_.init("final_ln", w);
    decode_.init("decode", w, 3, rng);
}

nn::Var STTransModel::forward(nn::Ctx& ctx, const MotionMatrix& observed_batch) const {
    if (observed_batch.cols() != static_cast<long>(observed_) * 3 * joints_) {
        throw Error::validation("st_trans: observed batch does not match trained configuration");
    }
    const int batch = static_cast<int>(observed_batch.rows());
    const int frames = observed_ + horizon_;
    // Frame-major row: (b*F + f)*J + j. Joint-major row: (b*J + j)*F + f.
    auto to_joint_major = std::make_shared<std::vector<int>>(
        static_cast<std::size_t>(batch) * frames * joints_);
    auto to_frame_major = std::make_shared<std::vector<int>>(to_joint_major->size());
    auto future_rows = std::make_shared<std::vector<int>>();
    for (int b = 0; b < batch; ++b) {
        for (int f = 0; f < frames; ++f) {
            for (int j = 0; j < joints_; ++j) {
                const int fm = (b * frames + f) * joints_ + j;
                const int jm = (b * joints_ + j) * frames + f;
                (*to_joint_major)[jm] = fm;
                (*to_frame_major)[fm] = jm;
                if (f >= observed_) future_rows->push_back(fm);
            }
        }
    }
    nn::Graph& g = ctx.g;
    const double drop = cfg_.dropout_rate;

    // Token coordinates: centered on the last observed pose, unit kPoseScale.
    // Future tokens start at zero (the Zero-Vel pose).
    MatrixXd coords = MatrixXd::Zero(static_cast<long>(batch) * frames * joints_, 3);
    MatrixXd base(static_cast<long>(batch) * horizon_ * joints_, 3);
    std::vector<int> frame_of(static_cast<std::size_t>(batch) * frames * joints_);
    std::vector<int> joint_of(frame_of.size());
    for (int b = 0; b < batch; ++b) {
        for (int f = 0; f < frames; ++f) {
            for (int j = 0; j < joints_; ++j) {
                const long r = (static_cast<long>(b) * frames + f) * joints_ + j;
                frame_of[r] = f;
                joint_of[r] = j;
                if (f < observed_) {
                    coords.row(r) = (observed_batch.block<1, 3>(b, f * 3 * joints_ + 3 * j) -
                                     observed_batch.block<1, 3>(b, (observed_ - 1) * 3 * joints_ + 3 * j)) /
                                    kPoseScale;
                }
            }
        }
        for (int t = 0; t < horizon_; ++t) {
            for (int j = 0; j < joints_; ++j) {
                base.row((static_cast<long>(b) * horizon_ + t) * joints_ + j) =
                    observed_batch.block<1, 3>(b, (observed_ - 1) * 3 * joints_ + 3 * j);
            }
        }
    }

    nn::Var x = embed_.forward(ctx, g.constant(std::move(coords)));
    auto fidx = std::make_shared<const std::vector<int>>(std::move(frame_of));
    auto jidx = std::make_shared<const std::vector<int>>(std::move(joint_of));
    x = g.add(x, g.gather_rows(ctx.leaf(frame_pos_), fidx));
    x = g.add(x, g.gather_rows(ctx.leaf(joint_pos_), jidx));

    for (const Block& blk : blocks_) {
        {  // temporal attention: tokens = frames, independently per (b, j)
            nn::Var h = blk.ln_temporal.forward(ctx, x);
            h = g.gather_rows(h, to_joint_major);
            const nn::Var q = blk.q_t.forward(ctx, h);
            const nn::Var k = blk.k_t.forward(ctx, h);
            const nn::Var v = blk.v_t.forward(ctx, h);
            h = g.attention(q, k, v, cfg_.num_heads, frames);
            h = blk.o_t.forward(ctx, h);
            h = g.gather_rows(h, to_frame_major);
            x = g.add(x, ctx.drop(h, drop));
        }
        {  // spatial attention: tokens = joints, independently per (b, f)
            nn::Var h = blk.ln_spatial.forward(ctx, x);
            const nn::Var q = blk.q_s.forward(ctx, h);
            const nn::Var k = blk.k_s.forward(ctx, h);
            const nn::Var v = blk.v_s.forward(ctx, h);
            h = g.attention(q, k, v, cfg_.num_heads, joints_);
            h = blk.o_s.forward(ctx, h);
            x = g.add(x, ctx.drop(h, drop));
        }
        {  // position-wise feed-forward
            nn::Var h = blk.ln_ff.forward(ctx, x);
            h = blk.ff2.forward(ctx, g.gelu_(blk.ff1.forward(ctx, h)));
            x = g.add(x, ctx.drop(h, drop));
        }
    }

    nn::Var fut = g.gather_rows(x, future_rows);
    fut = final_ln_.forward(ctx, fut);
    fut = decode_.forward(ctx, fut);
    return g.affine(fut, kPoseScale, std::move(base));
}

MotionMatrix STTransModel::forecast_impl(const MotionMatrix& observed, bool train_mode,
                                         Rng* dropout_rng) const {
    MotionMatrix batch(1, observed.size());
    for (int f = 0; f < observed.rows(); ++f) {
        batch.block(0, f * observed.cols(), 1, observed.cols()) = observed.row(f);
    }
    nn::Graph g;
    nn::Ctx ctx{g, train_mode, dropout_rng};
    const nn::Var out = forward(ctx, batch);
    MotionMatrix result(horizon_, 3 * joints_);
    for (int t = 0; t < horizon_; ++t) {
        for (int j = 0; j < joints_; ++j) {
            result.block<1, 3>(t, 3 * j) = out.value().row(t * joints_ + j);
        }
    }
    return result;
}

MotionMatrix STTransModel::forecast(const MotionMatrix& observed) const {
    return forecast_impl(observed, false, nullptr);
}

MotionMatrix STTransModel::forecast(const FrameMatrix& observed) const {
    return forecast(to_double(observed));
}

MotionMatrix STTransModel::forecast_stochastic(const MotionMatrix& observed, Rng& dropout_rng) const {
    return forecast_impl(observed, true, &dropout_rng);
}

std::vector<nn::Param*> STTransModel::params() {
    std::vector<nn::Param*> out;
    embed_.collect(out);
    out.push_back(&frame_pos_);
    out.push_back(&joint_pos_);
    for (Block& blk : blocks_) {
        blk.ln_temporal.collect(out);
        blk.ln_spatial.collect(out);
        blk.ln_ff.collect(out);
        blk.q_t.collect(out);
        blk.k_t.collect(out);
        blk.v_t.collect(out);
        blk.o_t.collect(out);
        blk.q_s.collect(out);
        blk.k_s.collect(out);
        blk.v_s.collect(out);
        blk.o_s.collect(out);
        blk.ff1.collect(out);
        blk.ff2.collect(out);
    }
    final_ln_.collect(out);
    decode_.collect(out);
    return out;
}

std::vector<const nn::Param*> STTransModel::params() const {
    auto mut = const_cast<STTransModel*>(this)->params();
    return {mut.begin(), mut.end()};
}

}  // namespace posecast
