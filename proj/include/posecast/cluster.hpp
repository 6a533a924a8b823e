#pragma once

#include <cstdint>
#include <vector>

#include "posecast/autoencoder.hpp"
#include "posecast/checkpoint.hpp"
#include "posecast/tensor.hpp"

namespace posecast {

struct DecConfig {
    int max_steps = 1000;        // phase-2 optimizer steps (full batch)
    int refresh_interval = 50;   // target distribution refresh cadence
    double tol = 0.001;          // stop when < this fraction of labels change
    double learning_rate = 1e-3;
    double clip_norm = 1.0;
    int finetune_steps = 100;          // phase-3 cross-entropy steps
    double finetune_learning_rate = 1e-4;  // gentle, so assignments stay near the centers
    int kmeans_iters = 100;
    int kmeans_attempts = 5;     // reseeds on empty clusters
    bool include_reconstruction = true;
};

// Trained sequence encoder, cluster centers and cluster count.
struct ClusterModel {
    SeqAutoencoder autoencoder;
    MatrixXd centers;  // K x latent
    int num_clusters = 1;
    double lambda = 0.1;
    nn::Linear head;  // phase-3 classification head, kept for inspection

    // Student-t soft assignment rows for a block of latent codes.
    MatrixXd soft_assign(const MatrixXd& z) const;
};

struct KMeansResult {
    MatrixXd centers;
    VectorXi assignment;
    double inertia = 0.0;
};

KMeansResult kmeans(const MatrixXd& points, int k, int iters, int attempts, std::uint64_t seed);

struct FitClustersResult {
    ClusterModel model;
    VectorXi init_assignment;   // after k-means on the pretrained encoder
    VectorXi final_assignment;  // after DEC refinement
    int phase2_steps = 0;
};

// Three phases: k-means initialization of the centers, joint minimization of
// KL(P||Q) + lambda * L_recons until hard assignments settle, then a
// cross-entropy fine-tune of encoder + head on the derived labels with the
// centers frozen.
FitClustersResult fit_clusters(const SeqAutoencoder& pretrained, const std::vector<MotionMatrix>& windows,
                               int num_clusters, double lambda, const DecConfig& cfg, std::uint64_t seed);

struct EpUReport {
    VectorXd per_sample_entropy;
    double epu = 0.0;
    int n = 0;
    MatrixXd assignment_probs;  // (N x K), rows on the simplex
    int encoder_passes = 0;     // exactly one per sample
    int forecaster_passes = 0;  // scoring never touches the forecaster
};

// Mean assignment entropy of the forecasts' embeddings; one encoder forward
// per sample and no sampling.
EpUReport epu_score(const ClusterModel& model, const std::vector<MotionMatrix>& forecasts);

// Fraction of samples whose cluster's majority label matches their own.
double cluster_purity(const VectorXi& assignment, const std::vector<int>& labels, int num_clusters);

void save_cluster_model(const ClusterModel& model, const std::string& path);
ClusterModel load_cluster_model(const std::string& path);

struct UncertaintyEstimate {
    double score = 0.0;
    int forward_passes = 0;
    bool degenerate = false;  // e.g. MC dropout with rate 0
};

// Mean over cells of the per-cell standard deviation across stochastic
// forward passes with dropout active.
UncertaintyEstimate mc_dropout_uncertainty(const Checkpoint& ckpt, const FrameMatrix& observed,
                                           int passes, std::uint64_t seed);

// Same statistic across independently trained members.
UncertaintyEstimate ensemble_uncertainty(const std::vector<const Checkpoint*>& members,
                                         const FrameMatrix& observed);

}  // namespace posecast
