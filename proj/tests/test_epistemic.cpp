#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "posecast/cluster.hpp"
#include "posecast/density.hpp"
#include "posecast/error.hpp"
#include "posecast/pose.hpp"
#include "posecast/train.hpp"

using namespace posecast;

namespace {

MatrixXd planted_blobs(int n, int k, int dim, double sep, double sigma, std::uint64_t seed) {
    Rng rng(seed);
    MatrixXd centers(k, dim);
    for (int c = 0; c < k; ++c)
        for (int d = 0; d < dim; ++d) centers(c, d) = rng.normal();
    double min_d = std::numeric_limits<double>::infinity();
    for (int a = 0; a < k; ++a)
        for (int b = a + 1; b < k; ++b) min_d = std::min(min_d, (centers.row(a) - centers.row(b)).norm());
    centers *= sep / min_d;
    MatrixXd z(n, dim);
    for (int i = 0; i < n; ++i) {
        for (int d = 0; d < dim; ++d) z(i, d) = centers(i % k, d) + sigma * rng.normal();
    }
    return z;
}

// Three clearly distinct synthetic motion families (hand swing / stepping
// feet / torso sway), windowed to length-L futures.
MotionFamilySpec test_family(int fam) {
    MotionFamilySpec spec;
    spec.family_id = fam;
    spec.amplitude_mm = MotionMatrix::Constant(8, 3, 4.0);
    spec.frequency_hz = VectorXd::Constant(8, 0.5);
    spec.phase_rad = VectorXd::LinSpaced(8, 0.0, 1.5);
    spec.noise_std_mm = 2.0;
    if (fam == 0) {
        for (int j : {4, 5}) {
            spec.amplitude_mm(j, 0) = 90.0;
            spec.amplitude_mm(j, 2) = 40.0;
            spec.frequency_hz[j] = 1.9;
        }
    } else if (fam == 1) {
        for (int j : {6, 7}) {
            spec.amplitude_mm(j, 2) = 70.0;
            spec.amplitude_mm(j, 1) = 35.0;
            spec.frequency_hz[j] = 0.8;
        }
    } else {
        for (int j : {1, 2, 3}) {
            spec.amplitude_mm(j, 1) = 60.0;
            spec.amplitude_mm(j, 0) = 25.0;
            spec.frequency_hz[j] = 1.3;
        }
    }
    return spec;
}

std::pair<std::vector<MotionMatrix>, std::vector<int>> family_windows(int per_family, int frames_len,
                                                                      std::uint64_t seed) {
    std::vector<MotionMatrix> windows;
    std::vector<int> labels;
    for (int fam = 0; fam < 3; ++fam) {
        const MotionFamilySpec spec = test_family(fam);
        int made = 0;
        for (int s = 0; made < per_family; ++s) {
            PoseSequence seq = generate_family(spec, 400, derive_seed(seed, "fam" + std::to_string(fam)) + s);
            auto cut = window(seq, 1, frames_len, frames_len,
                              "f" + std::to_string(fam) + "s" + std::to_string(s), fam);
            for (const auto& w : cut) {
                if (made >= per_family) break;
                windows.push_back(to_double(w.future));
                labels.push_back(fam);
                ++made;
            }
        }
    }
    return {windows, labels};
}

std::filesystem::path temp_file(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "posecast_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("collinear points all within an explicit cutoff") {
    MatrixXd pts(3, 2);
    pts << 0, 0, 1, 0, 2, 0;
    const DensityStats s = density_stats_with_dc(pts, 3.0);  // exceeds the diameter
    CHECK(s.rho[0] == 2);
    CHECK(s.rho[1] == 2);
    CHECK(s.rho[2] == 2);
}

TEST_CASE("density stats are exactly invariant under power-of-two scaling") {
    Rng rng(8);
    MatrixXd pts(40, 2);
    for (int i = 0; i < 40; ++i) {
        pts(i, 0) = rng.normal();
        pts(i, 1) = rng.normal();
    }
    const DensityStats a = density_stats(pts, 0.02);
    const DensityStats b = density_stats(4.0 * pts, 0.02);
    CHECK((a.rho.array() == b.rho.array()).all());
    for (int i = 0; i < 40; ++i) {
        CHECK(b.delta[i] == 4.0 * a.delta[i]);
        CHECK(b.gamma[i] == a.gamma[i]);
    }
    CHECK(b.d_c == 4.0 * a.d_c);
}

TEST_CASE("estimate_k recovers three planted blobs across ten seeds") {
    KEstimateConfig cfg;
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const MatrixXd z = planted_blobs(300, 3, 16, 10.0, 0.1, 500 + seed);
        if (estimate_k(z, cfg, seed).k == 3) ++hits;
    }
    CHECK(hits == 10);
}

TEST_CASE("estimate_k on a single tight blob returns one") {
    KEstimateConfig cfg;
    const MatrixXd z = planted_blobs(200, 1, 16, 1.0, 0.05, 77);
    CHECK(estimate_k(z, cfg, 0).k == 1);
}

TEST_CASE("estimate_k is invariant to translation and uniform scaling") {
    KEstimateConfig cfg;
    const MatrixXd z = planted_blobs(150, 3, 8, 12.0, 0.2, 31);
    const KEstimate base = estimate_k(z, cfg, 4);
    MatrixXd moved = 1.7 * z;
    moved.rowwise() += Eigen::RowVectorXd::Constant(8, 42.0);
    const KEstimate shifted = estimate_k(moved, cfg, 4);
    CHECK(base.k == 3);
    CHECK(shifted.k == base.k);
}

TEST_CASE("estimate_k rejects degenerate geometry") {
    MatrixXd z = MatrixXd::Zero(30, 4);
    KEstimateConfig cfg;
    CHECK_THROWS_AS(estimate_k(z, cfg, 0), Error);
}

TEST_CASE("k_max rule") {
    CHECK(k_max_for(600, 32) == 32);
    CHECK(k_max_for(300, 32) == 30);
    CHECK(k_max_for(30, 32) == 3);
    CHECK(k_max_for(5, 32) == 1);
}

TEST_CASE("autoencoder reconstructs constant sequences") {
    // 50 constant sequences; MSE must drop below 1% of the (unit) variance of
    // the standardized inputs well within 200 epochs.
    Rng rng(12);
    std::vector<MotionMatrix> windows;
    for (int i = 0; i < 50; ++i) {
        MotionMatrix w(10, 24);
        for (int c = 0; c < 24; ++c) w.col(c).setConstant(100.0 * rng.normal());
        windows.push_back(w);
    }
    AutoencoderConfig cfg;
    cfg.epochs = 200;
    const PretrainResult result = pretrain_autoencoder(windows, cfg, 3);
    CHECK(result.epoch_loss.front() > 0.0);      // untrained baseline, logged and finite
    CHECK(std::isfinite(result.epoch_loss.front()));
    CHECK(result.final_loss < 0.01);

    // Zero-epoch training only logs the baseline.
    AutoencoderConfig zero = cfg;
    zero.epochs = 0;
    const PretrainResult base = pretrain_autoencoder(windows, zero, 3);
    CHECK(base.epoch_loss.size() == 1);
    CHECK(std::isfinite(base.final_loss));
}

TEST_CASE("autoencoder pretraining is deterministic") {
    auto [windows, labels] = family_windows(10, 8, 5);
    AutoencoderConfig cfg;
    cfg.latent_dim = 8;
    cfg.epochs = 3;
    PretrainResult a = pretrain_autoencoder(windows, cfg, 9);
    PretrainResult b = pretrain_autoencoder(windows, cfg, 9);
    auto pa = a.state.params();
    auto pb = b.state.params();
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK((pa[i]->value.array() == pb[i]->value.array()).all());
    }
    CHECK(a.final_loss == b.final_loss);
}

TEST_CASE("dec clustering on planted families does not degrade k-means purity") {
    auto [windows, labels] = family_windows(40, 25, 21);
    AutoencoderConfig acfg;
    acfg.latent_dim = 16;
    acfg.epochs = 100;
    const PretrainResult pre = pretrain_autoencoder(windows, acfg, 2);

    DecConfig dcfg;
    dcfg.max_steps = 300;
    dcfg.finetune_steps = 60;
    const FitClustersResult fit = fit_clusters(pre.state, windows, 3, 0.1, dcfg, 7);

    const double purity_init = cluster_purity(fit.init_assignment, labels, 3);
    const double purity_final = cluster_purity(fit.final_assignment, labels, 3);
    CHECK(purity_final >= purity_init);
    CHECK(purity_final > 0.9);

    // Assignment rows are simplex rows with entropies in [0, ln K].
    const EpUReport report = epu_score(fit.model, windows);
    for (int i = 0; i < report.n; ++i) {
        CHECK(report.assignment_probs.row(i).sum() == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(report.per_sample_entropy[i] >= 0.0);
        CHECK(report.per_sample_entropy[i] <= std::log(3.0) + 1e-12);
    }
    CHECK(report.encoder_passes == report.n);
    CHECK(report.forecaster_passes == 0);
}

TEST_CASE("lambda zero matches a run without the reconstruction term") {
    auto [windows, labels] = family_windows(15, 8, 3);
    AutoencoderConfig acfg;
    acfg.latent_dim = 8;
    acfg.epochs = 10;
    const PretrainResult pre = pretrain_autoencoder(windows, acfg, 4);

    DecConfig with_recon;
    with_recon.max_steps = 60;
    with_recon.finetune_steps = 5;
    DecConfig without_recon = with_recon;
    without_recon.include_reconstruction = false;

    const FitClustersResult a = fit_clusters(pre.state, windows, 2, 0.0, with_recon, 11);
    const FitClustersResult b = fit_clusters(pre.state, windows, 2, 0.0, without_recon, 11);
    CHECK((a.model.centers.array() == b.model.centers.array()).all());
    auto pa = const_cast<ClusterModel&>(a.model).autoencoder.params();
    auto pb = const_cast<ClusterModel&>(b.model).autoencoder.params();
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK((pa[i]->value.array() == pb[i]->value.array()).all());
    }
}

TEST_CASE("k equal to one gives exactly zero entropy") {
    auto [windows, labels] = family_windows(10, 8, 6);
    AutoencoderConfig acfg;
    acfg.latent_dim = 8;
    acfg.epochs = 5;
    const PretrainResult pre = pretrain_autoencoder(windows, acfg, 1);
    DecConfig dcfg;
    dcfg.max_steps = 20;
    dcfg.finetune_steps = 5;
    const FitClustersResult fit = fit_clusters(pre.state, windows, 1, 0.1, dcfg, 2);
    const EpUReport report = epu_score(fit.model, windows);
    CHECK(report.epu == 0.0);
    for (int i = 0; i < report.n; ++i) {
        CHECK(report.assignment_probs(i, 0) == 1.0);
        CHECK(report.per_sample_entropy[i] == 0.0);
    }
}

TEST_CASE("uniform assignment rows give maximum entropy ln K") {
    // A point equidistant from 4 symmetric centers is assigned uniformly.
    ClusterModel model;
    model.num_clusters = 4;
    model.centers.resize(4, 2);
    model.centers << 1, 0, -1, 0, 0, 1, 0, -1;
    MatrixXd z = MatrixXd::Zero(1, 2);
    const MatrixXd q = model.soft_assign(z);
    double h = 0.0;
    for (int c = 0; c < 4; ++c) {
        CHECK(q(0, c) == doctest::Approx(0.25).epsilon(1e-12));
        h -= q(0, c) * std::log(q(0, c));
    }
    CHECK(h == doctest::Approx(std::log(4.0)).epsilon(1e-9));
}

TEST_CASE("cluster model round-trips through the archive") {
    auto [windows, labels] = family_windows(10, 8, 13);
    AutoencoderConfig acfg;
    acfg.latent_dim = 8;
    acfg.epochs = 5;
    const PretrainResult pre = pretrain_autoencoder(windows, acfg, 6);
    DecConfig dcfg;
    dcfg.max_steps = 20;
    dcfg.finetune_steps = 5;
    const FitClustersResult fit = fit_clusters(pre.state, windows, 2, 0.1, dcfg, 3);

    const auto path = temp_file("cluster.pckpt");
    save_cluster_model(fit.model, path.string());
    const ClusterModel loaded = load_cluster_model(path.string());
    const EpUReport before = epu_score(fit.model, windows);
    const EpUReport after = epu_score(loaded, windows);
    CHECK(before.epu == after.epu);
    CHECK((before.assignment_probs.array() == after.assignment_probs.array()).all());
}

TEST_CASE("mc dropout uncertainty") {
    // A tiny trained checkpoint with dropout.
    MotionFamilySpec spec;
    spec.amplitude_mm = MotionMatrix::Constant(8, 3, 20.0);
    spec.frequency_hz = VectorXd::Constant(8, 1.0);
    spec.phase_rad = VectorXd::Zero(8);
    spec.noise_std_mm = 1.0;
    std::vector<ForecastSample> samples;
    for (int s = 0; s < 6; ++s) {
        PoseSequence seq = generate_family(spec, 30, 40 + s);
        auto w = window(seq, 3, 4, 10, "s" + std::to_string(s));
        samples.insert(samples.end(), w.begin(), w.end());
    }
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 8;
    cfg.seed = 1;
    cfg.model.num_blocks = 1;
    cfg.model.model_width = 8;
    cfg.model.num_heads = 2;
    cfg.model.mlp_hidden = 16;
    cfg.model.dropout_rate = 0.2;
    const Checkpoint ckpt = train(ForecasterKind::STTrans, samples, cfg);

    const UncertaintyEstimate a = mc_dropout_uncertainty(ckpt, samples[0].observed, 5, 3);
    CHECK(a.forward_passes == 5);
    CHECK(a.score > 0.0);
    CHECK(!a.degenerate);
    const UncertaintyEstimate b = mc_dropout_uncertainty(ckpt, samples[0].observed, 5, 3);
    CHECK(a.score == b.score);  // seeded reproducibility

    TrainConfig no_drop = cfg;
    no_drop.model.dropout_rate = 0.0;
    const Checkpoint ckpt0 = train(ForecasterKind::STTrans, samples, no_drop);
    const UncertaintyEstimate c = mc_dropout_uncertainty(ckpt0, samples[0].observed, 4, 3);
    CHECK(c.degenerate);
    CHECK(c.score == 0.0);
    CHECK(c.forward_passes == 4);

    CHECK_THROWS_AS(mc_dropout_uncertainty(ckpt, samples[0].observed, 1, 3), Error);
}

TEST_CASE("ensemble uncertainty") {
    const int O = 3, T = 4, J = 8;
    TrainConfig cfg;
    cfg.model.num_blocks = 1;
    cfg.model.model_width = 8;
    cfg.model.num_heads = 2;
    cfg.model.mlp_hidden = 16;
    cfg.model.dropout_rate = 0.0;

    auto make_ckpt = [&](std::uint64_t seed) {
        Checkpoint c;
        c.kind = ForecasterKind::STTrans;
        c.observed = O;
        c.horizon = T;
        c.joints = J;
        c.train_cfg = cfg;
        c.train_cfg.seed = seed;
        c.model.emplace(cfg.model, O, T, J, seed);
        return c;
    };

    FrameMatrix observed = FrameMatrix::Zero(O, 3 * J);
    for (int f = 0; f < O; ++f)
        for (int c = 0; c < 3 * J; ++c) observed(f, c) = static_cast<float>(3 * f + 0.1 * c);

    // Identical members: zero uncertainty.
    Checkpoint m1 = make_ckpt(5), m2 = make_ckpt(5);
    const UncertaintyEstimate same = ensemble_uncertainty({&m1, &m2}, observed);
    CHECK(same.score == 0.0);
    CHECK(same.forward_passes == 2);

    // Second member offset by 5 mm on z via the decode bias: population std
    // of {a, a+5} is 2.5.
    Checkpoint shifted = make_ckpt(5);
    for (nn::Param* p : shifted.model->params()) {
        if (p->name == "decode.bias") p->value(0, 2) += 0.05;  // times kPoseScale = 5 mm
    }
    const UncertaintyEstimate two = ensemble_uncertainty({&m1, &shifted}, observed);
    CHECK(two.score == doctest::Approx(2.5).epsilon(1e-9));

    Checkpoint m3 = make_ckpt(6);
    const UncertaintyEstimate three = ensemble_uncertainty({&m1, &m2, &m3}, observed);
    CHECK(three.forward_passes == 3);

    // Mismatched architectures are rejected.
    Checkpoint other = make_ckpt(5);
    other.train_cfg.model.model_width = 4;
    other.train_cfg.model.num_heads = 1;
    other.model.emplace(other.train_cfg.model, O, T, J, 5);
    CHECK_THROWS_AS(ensemble_uncertainty({&m1, &other}, observed), Error);
    CHECK_THROWS_AS(ensemble_uncertainty({&m1}, observed), Error);
}
