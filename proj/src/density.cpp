#include "posecast/density.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "posecast/error.hpp"

namespace posecast {

int k_max_for(int n, int cap) { return std::max(1, std::min({cap, n / 10, n - 1})); }

namespace {

DensityStats density_stats_impl(const MatrixXd& embedding_2d, double dc_quantile, double explicit_dc) {
    const int n = static_cast<int>(embedding_2d.rows());
    if (n < 3) throw Error::validation("density: needs at least 3 points");
    DensityStats s;
    s.embedding_2d = embedding_2d;

    MatrixXd dist(n, n);
    std::vector<double> all_pairs;
    all_pairs.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    double max_dist = 0.0;
    for (int i = 0; i < n; ++i) {
        dist(i, i) = 0.0;
        for (int j = i + 1; j < n; ++j) {
            const double d = (embedding_2d.row(i) - embedding_2d.row(j)).norm();
            dist(i, j) = d;
            dist(j, i) = d;
            all_pairs.push_back(d);
            max_dist = std::max(max_dist, d);
        }
    }
    if (max_dist == 0.0) throw Error::validation("density: degenerate geometry, all points identical");

    if (explicit_dc > 0.0) {
        s.d_c = explicit_dc;
    } else {
        std::sort(all_pairs.begin(), all_pairs.end());
        std::size_t idx = static_cast<std::size_t>(dc_quantile * static_cast<double>(all_pairs.size()));
        idx = std::min(idx, all_pairs.size() - 1);
        s.d_c = all_pairs[idx];
        if (s.d_c == 0.0) {
            // Duplicates dominate the low quantile; fall back to the smallest
            // positive distance so rho stays informative.
            const auto it = std::upper_bound(all_pairs.begin(), all_pairs.end(), 0.0);
            s.d_c = it != all_pairs.end() ? *it : max_dist;
        }
    }

    s.rho = VectorXi::Zero(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (j != i && dist(i, j) < s.d_c) ++s.rho[i];
        }
    }

    // Process in decreasing density; the densest point takes its maximum
    // distance, everyone else the minimum distance to a denser predecessor
    // (ties broken by index).
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (s.rho[a] != s.rho[b]) return s.rho[a] > s.rho[b];
        return a < b;
    });
    s.delta = VectorXd::Zero(n);
    for (int pos = 0; pos < n; ++pos) {
        const int i = order[pos];
        if (pos == 0) {
            s.delta[i] = dist.row(i).maxCoeff();
            continue;
        }
        double best = std::numeric_limits<double>::infinity();
        for (int prev = 0; prev < pos; ++prev) best = std::min(best, dist(i, order[prev]));
        s.delta[i] = best;
    }

    const double rho_min = static_cast<double>(s.rho.minCoeff());
    const double rho_range = static_cast<double>(s.rho.maxCoeff()) - rho_min;
    const double delta_min = s.delta.minCoeff();
    const double delta_range = s.delta.maxCoeff() - delta_min;
    s.gamma = VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
        const double rho_hat = rho_range > 0.0 ? (s.rho[i] - rho_min) / rho_range : 0.0;
        const double delta_hat = delta_range > 0.0 ? (s.delta[i] - delta_min) / delta_range : 0.0;
        s.gamma[i] = rho_hat * delta_hat;
    }
    return s;
}

}  // namespace

DensityStats density_stats(const MatrixXd& embedding_2d, double dc_quantile) {
    return density_stats_impl(embedding_2d, dc_quantile, 0.0);
}

DensityStats density_stats_with_dc(const MatrixXd& embedding_2d, double d_c) {
    return density_stats_impl(embedding_2d, 0.0, d_c);
}

KEstimate estimate_k(const MatrixXd& embeddings, const KEstimateConfig& cfg, std::uint64_t seed,
                     const Reducer2D* reducer) {
    const int n = static_cast<int>(embeddings.rows());
    if (n < 3) throw Error::validation("estimate_k: needs at least 3 points");
    const TsneReducer default_reducer(cfg.tsne);
    const Reducer2D& r2d = reducer != nullptr ? *reducer : default_reducer;

    KEstimate est;
    est.stats = density_stats(r2d.reduce(embeddings, seed), cfg.dc_quantile);

    VectorXd gamma = est.stats.gamma;
    std::sort(gamma.data(), gamma.data() + gamma.size(), std::greater<double>());
    est.gamma_sorted = gamma;

    const int k_max = k_max_for(n, cfg.k_max_cap);
    est.r = VectorXd::Zero(k_max);
    int best = 1;
    double best_r = -1.0;
    for (int i = 1; i <= k_max; ++i) {
        const double ratio = gamma[i - 1] / (gamma[i] + cfg.epsilon);
        est.r[i - 1] = ratio;
        if (ratio > best_r) {
            best_r = ratio;
            best = i;
        }
    }
    est.k = best;
    return est;
}

}  // namespace posecast
