#include "posecast/autoencoder.hpp"

#include <cmath>

#include "posecast/error.hpp"

namespace posecast {

MatrixXd SeqAutoencoder::pack_windows(const std::vector<MotionMatrix>& windows) {
    if (windows.empty()) throw Error::validation("autoencoder: no windows");
    const long frames = windows[0].rows();
    const long cols = windows[0].cols();
    MatrixXd out(static_cast<long>(windows.size()), frames * cols);
    for (std::size_t i = 0; i < windows.size(); ++i) {
        if (windows[i].rows() != frames || windows[i].cols() != cols) {
            throw Error::validation("autoencoder: windows have inconsistent shapes");
        }
        for (long f = 0; f < frames; ++f) {
            out.block(static_cast<long>(i), f * cols, 1, cols) = windows[i].row(f);
        }
    }
    return out;
}

MatrixXd SeqAutoencoder::normalize(const MatrixXd& batch) const {
    const int d = 3 * joints;
    MatrixXd out(batch.rows(), batch.cols());
    for (int f = 0; f < frames; ++f) {
        out.middleCols(f * d, d) = (batch.middleCols(f * d, d).rowwise() - mean_pose.row(0)) / scale;
    }
    return out;
}

nn::Var SeqAutoencoder::encode(nn::Ctx& ctx, const MatrixXd& batch) const {
    const int d = 3 * joints;
    if (batch.cols() != static_cast<long>(frames) * d) {
        throw Error::validation("autoencoder: batch does not match the trained window shape");
    }
    nn::Graph& g = ctx.g;
    const nn::Var input = g.constant(normalize(batch));
    const int b = static_cast<int>(batch.rows());
    nn::Var h = g.constant(MatrixXd::Zero(b, latent_dim));
    nn::Var c = g.constant(MatrixXd::Zero(b, latent_dim));
    nn::Var pooled;
    for (int f = 0; f < frames; ++f) {
        const nn::Var x = g.slice_cols(input, f * d, d);
        std::tie(h, c) = encoder.step(ctx, x, h, c);
        if (mean_pool) pooled = f == 0 ? h : g.add(pooled, h);
    }
    if (mean_pool) return g.scale(pooled, 1.0 / frames);
    return h;
}

nn::Var SeqAutoencoder::decode(nn::Ctx& ctx, nn::Var z) const {
    nn::Graph& g = ctx.g;
    const int b = z.rows();
    nn::Var h = z;
    nn::Var c = g.constant(MatrixXd::Zero(b, latent_dim));
    std::vector<nn::Var> steps;
    steps.reserve(frames);
    for (int f = 0; f < frames; ++f) {
        std::tie(h, c) = decoder.step(ctx, z, h, c);
        steps.push_back(readout.forward(ctx, h));
    }
    // Rows laid out (f * B + b); reconstruction targets use the same layout.
    return g.concat_rows(steps);
}

MatrixXd SeqAutoencoder::encode_values(const std::vector<MotionMatrix>& windows) const {
    const MatrixXd batch = pack_windows(windows);
    nn::Graph g;
    nn::Ctx ctx{g, false, nullptr};
    return encode(ctx, batch).value();
}

std::vector<nn::Param*> SeqAutoencoder::params() {
    std::vector<nn::Param*> out;
    encoder.collect(out);
    decoder.collect(out);
    readout.collect(out);
    return out;
}

PretrainResult pretrain_autoencoder(const std::vector<MotionMatrix>& windows,
                                    const AutoencoderConfig& cfg, std::uint64_t seed) {
    if (windows.size() < 2) throw Error::validation("autoencoder: needs at least 2 windows");
    if (cfg.latent_dim < 1 || cfg.epochs < 0) throw Error::validation("autoencoder: bad config");

    PretrainResult result;
    SeqAutoencoder& ae = result.state;
    ae.frames = static_cast<int>(windows[0].rows());
    ae.joints = static_cast<int>(windows[0].cols()) / 3;
    ae.latent_dim = cfg.latent_dim;
    ae.mean_pool = cfg.mean_pool;
    const int d = 3 * ae.joints;

    const MatrixXd packed = SeqAutoencoder::pack_windows(windows);
    const long n = packed.rows();

    // Standardization statistics over all training frames, kept on the
    // float32 grid so the archived model reproduces scores exactly.
    ae.mean_pose = MatrixXd::Zero(1, d);
    for (int f = 0; f < ae.frames; ++f) ae.mean_pose += packed.middleCols(f * d, d).colwise().mean();
    ae.mean_pose /= ae.frames;
    ae.mean_pose = ae.mean_pose.unaryExpr([](double v) { return snap_f32(v); });
    double var = 0.0;
    for (int f = 0; f < ae.frames; ++f) {
        var += (packed.middleCols(f * d, d).rowwise() - ae.mean_pose.row(0)).squaredNorm();
    }
    var /= static_cast<double>(n) * ae.frames * d;
    ae.scale = var > 0.0 ? snap_f32(std::sqrt(var)) : 1.0;

    Rng rng(seed);
    ae.encoder.init("encoder", d, cfg.latent_dim, rng);
    ae.decoder.init("decoder", cfg.latent_dim, cfg.latent_dim, rng);
    ae.readout.init("readout", cfg.latent_dim, d, rng);

    nn::Adam opt;
    opt.lr = cfg.learning_rate;
    opt.clip_norm = cfg.clip_norm;
    const std::vector<nn::Param*> params = ae.params();
    opt.attach(params);

    // Targets in the stacked (frame-major rows) layout produced by decode().
    auto stacked_targets = [&](const std::vector<int>& ids) {
        MatrixXd t(static_cast<long>(ids.size()) * ae.frames, d);
        for (int f = 0; f < ae.frames; ++f) {
            for (std::size_t b = 0; b < ids.size(); ++b) {
                t.row(static_cast<long>(f) * ids.size() + b) =
                    (packed.block(ids[b], f * d, 1, d).row(0) - ae.mean_pose.row(0)) / ae.scale;
            }
        }
        return t;
    };

    const long batch = std::max<long>(1, cfg.batch_size);
    for (int epoch = 0; epoch <= cfg.epochs; ++epoch) {
        // Epoch 0 only measures the untrained baseline loss.
        std::vector<int> order(n);
        for (long i = 0; i < n; ++i) order[i] = static_cast<int>(i);
        if (epoch > 0) {
            Rng order_rng(derive_seed(seed, "ae_epoch_" + std::to_string(epoch)));
            order_rng.shuffle(order);
        }
        double loss_acc = 0.0;
        long seen = 0;
        for (long start = 0; start < n; start += batch) {
            const long end = std::min(n, start + batch);
            std::vector<int> ids(order.begin() + start, order.begin() + end);
            MatrixXd rows(static_cast<long>(ids.size()), packed.cols());
            for (std::size_t b = 0; b < ids.size(); ++b) rows.row(static_cast<long>(b)) = packed.row(ids[b]);

            nn::zero_grads(params);
            nn::Graph g;
            nn::Ctx ctx{g, epoch > 0, nullptr};
            const nn::Var z = ae.encode(ctx, rows);
            const nn::Var recon = ae.decode(ctx, z);
            const nn::Var loss = g.mse_loss(recon, stacked_targets(ids));
            const double value = loss.value()(0, 0);
            if (!std::isfinite(value)) {
                throw Error::runtime("autoencoder: diverged at epoch " + std::to_string(epoch));
            }
            loss_acc += value * static_cast<double>(ids.size());
            seen += static_cast<long>(ids.size());
            if (epoch > 0) {
                g.backward(loss);
                opt.step();
            }
        }
        result.epoch_loss.push_back(loss_acc / static_cast<double>(seen));
    }
    result.final_loss = result.epoch_loss.back();
    return result;
}

}  // namespace posecast
