#include "posecast/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "posecast/error.hpp"

namespace posecast {

KMeansResult kmeans(const MatrixXd& points, int k, int iters, int attempts, std::uint64_t seed) {
    const int n = static_cast<int>(points.rows());
    if (k < 1) throw Error::validation("kmeans: k must be >= 1");
    if (n < k) throw Error::validation("kmeans: fewer points than clusters");

    // Best-of-N restarts by inertia; attempts additionally covers reseeding
    // after empty clusters.
    KMeansResult best;
    bool have_best = false;
    const int restarts = 10;
    for (int attempt = 0; attempt < restarts + std::max(1, attempts); ++attempt) {
        Rng rng(derive_seed(seed, "kmeans_attempt_" + std::to_string(attempt)));
        // k-means++ seeding
        MatrixXd centers(k, points.cols());
        centers.row(0) = points.row(static_cast<int>(rng.uniform_int(n)));
        VectorXd d2 = (points.rowwise() - centers.row(0)).rowwise().squaredNorm();
        for (int c = 1; c < k; ++c) {
            const double total = d2.sum();
            int chosen = 0;
            if (total > 0.0) {
                double target = rng.uniform() * total, acc = 0.0;
                for (int i = 0; i < n; ++i) {
                    acc += d2[i];
                    if (acc >= target) {
                        chosen = i;
                        break;
                    }
                }
            } else {
                chosen = static_cast<int>(rng.uniform_int(n));
            }
            centers.row(c) = points.row(chosen);
            d2 = d2.cwiseMin((points.rowwise() - centers.row(c)).rowwise().squaredNorm());
        }

        VectorXi assignment = VectorXi::Zero(n);
        bool empty_cluster = false;
        for (int iter = 0; iter < iters; ++iter) {
            bool changed = false;
            for (int i = 0; i < n; ++i) {
                int best = 0;
                double best_d = (points.row(i) - centers.row(0)).squaredNorm();
                for (int c = 1; c < k; ++c) {
                    const double d = (points.row(i) - centers.row(c)).squaredNorm();
                    if (d < best_d) {
                        best_d = d;
                        best = c;
                    }
                }
                if (assignment[i] != best) {
                    assignment[i] = best;
                    changed = true;
                }
            }
            MatrixXd sums = MatrixXd::Zero(k, points.cols());
            VectorXi counts = VectorXi::Zero(k);
            for (int i = 0; i < n; ++i) {
                sums.row(assignment[i]) += points.row(i);
                ++counts[assignment[i]];
            }
            empty_cluster = (counts.array() == 0).any();
            if (empty_cluster) break;
            for (int c = 0; c < k; ++c) centers.row(c) = sums.row(c) / counts[c];
            if (!changed && iter > 0) break;
        }
        if (empty_cluster) continue;

        KMeansResult result;
        result.centers = centers;
        result.assignment = assignment;
        for (int i = 0; i < n; ++i) {
            result.inertia += (points.row(i) - centers.row(assignment[i])).squaredNorm();
        }
        if (!have_best || result.inertia < best.inertia) {
            best = std::move(result);
            have_best = true;
        }
        if (attempt + 1 >= restarts && have_best) break;
    }
    if (!have_best) {
        throw Error::runtime("kmeans: empty cluster after " + std::to_string(attempts) + " seeding attempts");
    }
    return best;
}

MatrixXd ClusterModel::soft_assign(const MatrixXd& z) const {
    const int n = static_cast<int>(z.rows());
    MatrixXd q(n, num_clusters);
    for (int i = 0; i < n; ++i) {
        double sum = 0.0;
        for (int c = 0; c < num_clusters; ++c) {
            q(i, c) = 1.0 / (1.0 + (z.row(i) - centers.row(c)).squaredNorm());
            sum += q(i, c);
        }
        q.row(i) /= sum;
    }
    return q;
}

namespace {

// DEC target distribution: squared soft assignments normalized by cluster
// frequency, rows renormalized.
MatrixXd dec_target(const MatrixXd& q) {
    const Eigen::RowVectorXd freq = q.colwise().sum();
    MatrixXd p = q.array().square().matrix();
    for (int c = 0; c < p.cols(); ++c) p.col(c) /= std::max(freq[c], 1e-12);
    for (int i = 0; i < p.rows(); ++i) p.row(i) /= p.row(i).sum();
    return p;
}

VectorXi hard_labels(const MatrixXd& q) {
    VectorXi labels(q.rows());
    for (int i = 0; i < q.rows(); ++i) {
        int best = 0;
        for (int c = 1; c < q.cols(); ++c) {
            if (q(i, c) > q(i, best)) best = c;
        }
        labels[i] = best;
    }
    return labels;
}

double label_change_fraction(const VectorXi& a, const VectorXi& b) {
    int changed = 0;
    for (int i = 0; i < a.size(); ++i) changed += a[i] != b[i] ? 1 : 0;
    return static_cast<double>(changed) / static_cast<double>(a.size());
}

}  // namespace

FitClustersResult fit_clusters(const SeqAutoencoder& pretrained, const std::vector<MotionMatrix>& windows,
                               int num_clusters, double lambda, const DecConfig& cfg, std::uint64_t seed) {
    if (num_clusters < 1) throw Error::validation("fit_clusters: K must be >= 1");
    if (static_cast<int>(windows.size()) < num_clusters) {
        throw Error::validation("fit_clusters: fewer windows than clusters");
    }

    FitClustersResult result;
    ClusterModel& model = result.model;
    model.autoencoder = pretrained;
    model.num_clusters = num_clusters;
    model.lambda = lambda;

    const MatrixXd batch = SeqAutoencoder::pack_windows(windows);
    const int n = static_cast<int>(batch.rows());
    const int d = 3 * model.autoencoder.joints;
    const int frames = model.autoencoder.frames;

    // Phase 1: k-means on the pretrained embedding.
    const MatrixXd z0 = model.autoencoder.encode_values(windows);
    const KMeansResult km = kmeans(z0, num_clusters, cfg.kmeans_iters, cfg.kmeans_attempts,
                                   derive_seed(seed, "dec_kmeans"));
    result.init_assignment = km.assignment;

    nn::Param centers_param;
    centers_param.init("centers", km.centers);
    centers_param.snap();

    std::vector<nn::Param*> params = model.autoencoder.params();
    params.push_back(&centers_param);
    nn::Adam opt;
    opt.lr = cfg.learning_rate;
    opt.clip_norm = cfg.clip_norm;
    opt.attach(params);

    // Reconstruction targets in decode()'s stacked layout (row f*B + b).
    MatrixXd recon_target(static_cast<long>(frames) * n, d);
    for (int f = 0; f < frames; ++f) {
        for (int b = 0; b < n; ++b) {
            recon_target.row(static_cast<long>(f) * n + b) =
                (batch.block(b, f * d, 1, d).row(0) - model.autoencoder.mean_pose.row(0)) /
                model.autoencoder.scale;
        }
    }

    // Phase 2: joint KL(P||Q) + lambda * reconstruction, full batch.
    MatrixXd target;
    VectorXi prev_labels = km.assignment;
    for (int step = 0; step < cfg.max_steps; ++step) {
        if (step % cfg.refresh_interval == 0) {
            model.centers = centers_param.value;
            const MatrixXd q_now = model.soft_assign(model.autoencoder.encode_values(windows));
            target = dec_target(q_now);
            const VectorXi labels = hard_labels(q_now);
            if (step > 0 && label_change_fraction(labels, prev_labels) < cfg.tol) {
                prev_labels = labels;
                break;
            }
            prev_labels = labels;
        }
        nn::zero_grads(params);
        nn::Graph g;
        nn::Ctx ctx{g, true, nullptr};
        const nn::Var z = model.autoencoder.encode(ctx, batch);
        const nn::Var q = g.student_t_assign(z, g.param(centers_param));
        nn::Var loss = g.kl_to_target(q, target);
        if (cfg.include_reconstruction) {
            const nn::Var recon = model.autoencoder.decode(ctx, z);
            loss = g.add(loss, g.scale(g.mse_loss(recon, recon_target), lambda));
        }
        if (!std::isfinite(loss.value()(0, 0))) {
            throw Error::runtime("fit_clusters: diverged at phase-2 step " + std::to_string(step));
        }
        g.backward(loss);
        opt.step();
        ++result.phase2_steps;
    }
    model.centers = centers_param.value;

    // Phase 3: cross-entropy fine-tune of encoder + head; centers frozen.
    const MatrixXd q_final = model.soft_assign(model.autoencoder.encode_values(windows));
    auto labels = std::make_shared<std::vector<int>>(n);
    const VectorXi hard = hard_labels(q_final);
    for (int i = 0; i < n; ++i) (*labels)[i] = hard[i];

    Rng head_rng(derive_seed(seed, "dec_head"));
    model.head.init("head", model.autoencoder.latent_dim, num_clusters, head_rng);
    std::vector<nn::Param*> phase3_params = model.autoencoder.params();
    model.head.collect(phase3_params);
    nn::Adam opt3;
    opt3.lr = cfg.finetune_learning_rate;
    opt3.clip_norm = cfg.clip_norm;
    opt3.attach(phase3_params);
    for (int step = 0; step < cfg.finetune_steps; ++step) {
        nn::zero_grads(phase3_params);
        nn::Graph g;
        nn::Ctx ctx{g, true, nullptr};
        const nn::Var z = model.autoencoder.encode(ctx, batch);
        const nn::Var logits = model.head.forward(ctx, z);
        const nn::Var loss = g.cross_entropy(logits, labels);
        if (!std::isfinite(loss.value()(0, 0))) {
            throw Error::runtime("fit_clusters: diverged at phase-3 step " + std::to_string(step));
        }
        g.backward(loss);
        opt3.step();
    }

    result.final_assignment = hard_labels(model.soft_assign(model.autoencoder.encode_values(windows)));
    return result;
}

EpUReport epu_score(const ClusterModel& model, const std::vector<MotionMatrix>& forecasts) {
    if (forecasts.empty()) throw Error::validation("epu_score: no forecasts");
    for (const auto& f : forecasts) {
        if (f.rows() != model.autoencoder.frames || f.cols() != 3 * model.autoencoder.joints) {
            throw Error::validation("epu_score: forecast shape does not match the encoder input shape");
        }
    }
    EpUReport report;
    report.n = static_cast<int>(forecasts.size());
    const MatrixXd z = model.autoencoder.encode_values(forecasts);  // one pass per sample
    report.encoder_passes = report.n;
    report.forecaster_passes = 0;
    report.assignment_probs = model.soft_assign(z);
    report.per_sample_entropy = VectorXd::Zero(report.n);
    for (int i = 0; i < report.n; ++i) {
        double h = 0.0;
        for (int c = 0; c < model.num_clusters; ++c) {
            const double p = report.assignment_probs(i, c);
            if (p > 0.0) h -= p * std::log(p);
        }
        report.per_sample_entropy[i] = h;
    }
    report.epu = report.per_sample_entropy.mean();
    return report;
}

double cluster_purity(const VectorXi& assignment, const std::vector<int>& labels, int num_clusters) {
    if (assignment.size() != static_cast<long>(labels.size()) || assignment.size() == 0) {
        throw Error::validation("purity: assignment/label size mismatch");
    }
    std::map<std::pair<int, int>, int> counts;
    for (int i = 0; i < assignment.size(); ++i) ++counts[{assignment[i], labels[i]}];
    std::vector<int> best(num_clusters, 0);
    for (const auto& [key, count] : counts) best[key.first] = std::max(best[key.first], count);
    long majority = 0;
    for (int b : best) majority += b;
    return static_cast<double>(majority) / static_cast<double>(assignment.size());
}

void save_cluster_model(const ClusterModel& model, const std::string& path) {
    nlohmann::ordered_json manifest;
    manifest["format_version"] = 1;
    manifest["kind"] = "cluster_model";
    manifest["configs"] = {{"shape", nlohmann::ordered_json{{"frames", model.autoencoder.frames},
                                                            {"joints", model.autoencoder.joints},
                                                            {"latent_dim", model.autoencoder.latent_dim},
                                                            {"mean_pool", model.autoencoder.mean_pool}}},
                           {"num_clusters", model.num_clusters},
                           {"lambda", model.lambda},
                           {"scale", model.autoencoder.scale}};
    std::vector<ArchiveBlob> blobs;
    auto& ae = const_cast<ClusterModel&>(model).autoencoder;
    for (const nn::Param* p : ae.params()) blobs.push_back({p->name, p->value});
    blobs.push_back({"head.weight", model.head.weight.value});
    blobs.push_back({"head.bias", model.head.bias.value});
    blobs.push_back({"centers", model.centers});
    blobs.push_back({"mean_pose", model.autoencoder.mean_pose});
    write_archive(path, std::move(manifest), blobs);
}

ClusterModel load_cluster_model(const std::string& path) {
    const Archive ar = read_archive(path, "cluster_model");
    ClusterModel model;
    const auto& shape = ar.manifest.at("configs").at("shape");
    model.autoencoder.frames = shape.at("frames").get<int>();
    model.autoencoder.joints = shape.at("joints").get<int>();
    model.autoencoder.latent_dim = shape.at("latent_dim").get<int>();
    model.autoencoder.mean_pool = shape.at("mean_pool").get<bool>();
    model.num_clusters = ar.manifest.at("configs").at("num_clusters").get<int>();
    model.lambda = ar.manifest.at("configs").at("lambda").get<double>();
    model.autoencoder.scale = ar.manifest.at("configs").at("scale").get<double>();

    const int d = 3 * model.autoencoder.joints;
    const int latent = model.autoencoder.latent_dim;
    Rng dummy(0);
    model.autoencoder.encoder.init("encoder", d, latent, dummy);
    model.autoencoder.decoder.init("decoder", latent, latent, dummy);
    model.autoencoder.readout.init("readout", latent, d, dummy);
    model.head.init("head", latent, model.num_clusters, dummy);
    for (nn::Param* p : model.autoencoder.params()) p->value = ar.blob(p->name).data;
    model.head.weight.value = ar.blob("head.weight").data;
    model.head.bias.value = ar.blob("head.bias").data;
    model.centers = ar.blob("centers").data;
    model.autoencoder.mean_pose = ar.blob("mean_pose").data;
    if (model.centers.rows() != model.num_clusters || model.centers.cols() != latent) {
        throw Error::format("cluster model: centers blob shape mismatch");
    }
    return model;
}

UncertaintyEstimate mc_dropout_uncertainty(const Checkpoint& ckpt, const FrameMatrix& observed,
                                           int passes, std::uint64_t seed) {
    if (passes < 2) throw Error::validation("mc_dropout: passes must be >= 2");
    if (ckpt.kind != ForecasterKind::STTrans || !ckpt.model) {
        throw Error::validation("mc_dropout: checkpoint's network has no dropout layers");
    }
    UncertaintyEstimate out;
    out.degenerate = ckpt.train_cfg.model.dropout_rate == 0.0;

    const MotionMatrix obs = to_double(observed);
    std::vector<MotionMatrix> preds;
    Rng rng(seed);
    for (int m = 0; m < passes; ++m) {
        preds.push_back(ckpt.model->forecast_stochastic(obs, rng));
        ++out.forward_passes;
    }
    const int frames = static_cast<int>(preds[0].rows());
    const int joints = static_cast<int>(preds[0].cols()) / 3;
    double acc = 0.0;
    for (int t = 0; t < frames; ++t) {
        for (int j = 0; j < joints; ++j) {
            Eigen::RowVector3d mean = Eigen::RowVector3d::Zero();
            for (const auto& p : preds) mean += p.block<1, 3>(t, 3 * j);
            mean /= static_cast<double>(passes);
            double var = 0.0;
            for (const auto& p : preds) var += (p.block<1, 3>(t, 3 * j) - mean).squaredNorm();
            acc += std::sqrt(var / static_cast<double>(passes));
        }
    }
    out.score = acc / (static_cast<double>(frames) * joints);
    return out;
}

UncertaintyEstimate ensemble_uncertainty(const std::vector<const Checkpoint*>& members,
                                         const FrameMatrix& observed) {
    if (members.size() < 2) throw Error::validation("ensemble: needs at least 2 checkpoints");
    for (const Checkpoint* m : members) {
        if (m->kind != members[0]->kind || m->observed != members[0]->observed ||
            m->horizon != members[0]->horizon || m->joints != members[0]->joints ||
            (m->kind == ForecasterKind::STTrans && !(m->train_cfg.model == members[0]->train_cfg.model))) {
            throw Error::validation("ensemble: member architectures do not match");
        }
    }
    UncertaintyEstimate out;
    std::vector<MotionMatrix> preds;
    for (const Checkpoint* m : members) {
        preds.push_back(m->forecast(observed).y_hat);
        ++out.forward_passes;
    }
    const int frames = static_cast<int>(preds[0].rows());
    const int joints = static_cast<int>(preds[0].cols()) / 3;
    const int count = static_cast<int>(preds.size());
    double acc = 0.0;
    for (int t = 0; t < frames; ++t) {
        for (int j = 0; j < joints; ++j) {
            Eigen::RowVector3d mean = Eigen::RowVector3d::Zero();
            for (const auto& p : preds) mean += p.block<1, 3>(t, 3 * j);
            mean /= static_cast<double>(count);
            double var = 0.0;
            for (const auto& p : preds) var += (p.block<1, 3>(t, 3 * j) - mean).squaredNorm();
            acc += std::sqrt(var / static_cast<double>(count));
        }
    }
    out.score = acc / (static_cast<double>(frames) * joints);
    return out;
}

}  // namespace posecast
