#pragma once

#include <cstdint>
#include <vector>

#include "posecast/nn.hpp"
#include "posecast/tensor.hpp"

namespace posecast {

struct AutoencoderConfig {
    int latent_dim = 32;  // recurrent hidden size
    int epochs = 100;
    int batch_size = 32;
    double learning_rate = 5e-3;
    double clip_norm = 1.0;
    bool mean_pool = true;  // latent = time-mean of hidden states (phase invariant)
};

// Recurrent sequence autoencoder over fixed-length motion windows. Inputs are
// standardized with the training mean pose and a global scale; the latent
// code pools the encoder's hidden states (time mean by default, final state
// otherwise), and the decoder re-reads the latent at every step.
struct SeqAutoencoder {
    int frames = 0;
    int joints = 0;
    int latent_dim = 0;
    bool mean_pool = true;
    nn::Lstm encoder;
    nn::Lstm decoder;
    nn::Linear readout;     // hidden -> 3J
    MatrixXd mean_pose;     // 1 x 3J
    double scale = 1.0;

    // batch: (B x L*3J) raw mm. Returns the latent codes (B x latent).
    nn::Var encode(nn::Ctx& ctx, const MatrixXd& batch) const;
    // Reconstruction in normalized units, (B x L*3J).
    nn::Var decode(nn::Ctx& ctx, nn::Var z) const;
    MatrixXd normalize(const MatrixXd& batch) const;

    // Plain (no-tape) encoding of whole windows; one forward pass per row.
    MatrixXd encode_values(const std::vector<MotionMatrix>& windows) const;

    std::vector<nn::Param*> params();

    static MatrixXd pack_windows(const std::vector<MotionMatrix>& windows);
};

struct PretrainResult {
    SeqAutoencoder state;
    double final_loss = 0.0;
    std::vector<double> epoch_loss;
};

// Minimizes mean squared reconstruction error over the training windows.
// Deterministic given the seed; throws on divergence.
PretrainResult pretrain_autoencoder(const std::vector<MotionMatrix>& windows,
                                    const AutoencoderConfig& cfg, std::uint64_t seed);

}  // namespace posecast
