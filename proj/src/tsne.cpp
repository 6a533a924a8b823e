#include "posecast/tsne.hpp"

#include <cmath>

#include "posecast/error.hpp"
#include "posecast/rng.hpp"

namespace posecast {

MatrixXd pca_2d(const MatrixXd& points) {
    const int n = static_cast<int>(points.rows());
    if (n < 1) throw Error::validation("pca: no points");
    const Eigen::RowVectorXd mean = points.colwise().mean();
    const MatrixXd centered = points.rowwise() - mean;
    const MatrixXd cov = centered.transpose() * centered / std::max(1, n - 1);
    Eigen::SelfAdjointEigenSolver<MatrixXd> solver(cov);
    const int d = static_cast<int>(points.cols());
    MatrixXd out(n, 2);
    // Eigenvalues ascend; take the last two columns.
    out.col(0) = centered * solver.eigenvectors().col(d - 1);
    out.col(1) = d >= 2 ? MatrixXd(centered * solver.eigenvectors().col(d - 2))
                        : MatrixXd(MatrixXd::Zero(n, 1));
    return out;
}

namespace {

// Squared pairwise distances, normalized by their mean so the affinity
// calibration is scale free.
MatrixXd normalized_sq_distances(const MatrixXd& x) {
    const int n = static_cast<int>(x.rows());
    MatrixXd d2(n, n);
    for (int i = 0; i < n; ++i) {
        d2(i, i) = 0.0;
        for (int j = i + 1; j < n; ++j) {
            const double v = (x.row(i) - x.row(j)).squaredNorm();
            d2(i, j) = v;
            d2(j, i) = v;
        }
    }
    double mean = 0.0;
    if (n > 1) mean = d2.sum() / (static_cast<double>(n) * (n - 1));
    if (mean <= 0.0) throw Error::runtime("tsne: degenerate geometry, all points identical");
    return d2 / mean;
}

// Symmetric affinities with per-point precision calibrated to the target
// perplexity by bisection (standard SNE calibration).
MatrixXd joint_affinities(const MatrixXd& d2, double perplexity) {
    const int n = static_cast<int>(d2.rows());
    const double target_entropy = std::log(perplexity);
    MatrixXd p = MatrixXd::Zero(n, n);
    VectorXd row(n);
    for (int i = 0; i < n; ++i) {
        double beta = 1.0, beta_lo = 0.0, beta_hi = std::numeric_limits<double>::infinity();
        for (int iter = 0; iter < 64; ++iter) {
            double sum = 0.0, weighted = 0.0;
            for (int j = 0; j < n; ++j) {
                if (j == i) {
                    row[j] = 0.0;
                    continue;
                }
                row[j] = std::exp(-beta * d2(i, j));
                sum += row[j];
                weighted += row[j] * d2(i, j);
            }
            if (sum <= 0.0) {
                beta_hi = beta;
                beta = (beta_lo + beta_hi) / 2.0;
                continue;
            }
            // H = log(sum) + beta * E[d2]
            const double entropy = std::log(sum) + beta * weighted / sum;
            if (std::abs(entropy - target_entropy) < 1e-7) break;
            if (entropy > target_entropy) {
                beta_lo = beta;
                beta = std::isinf(beta_hi) ? beta * 2.0 : (beta_lo + beta_hi) / 2.0;
            } else {
                beta_hi = beta;
                beta = (beta_lo + beta_hi) / 2.0;
            }
        }
        double sum = 0.0;
        for (int j = 0; j < n; ++j) sum += row[j];
        if (sum > 0.0) p.row(i) = row.transpose() / sum;
    }
    MatrixXd joint = (p + p.transpose()) / (2.0 * n);
    joint = joint.cwiseMax(1e-12);
    joint.diagonal().setZero();
    return joint;
}

}  // namespace

MatrixXd TsneReducer::reduce(const MatrixXd& points, std::uint64_t seed) const {
    const int n = static_cast<int>(points.rows());
    if (n < 3) throw Error::validation("tsne: needs at least 3 points");
    const double perplexity = std::min(opts_.perplexity, (n - 1) / 3.0);

    const MatrixXd d2 = normalized_sq_distances(points);
    MatrixXd p = joint_affinities(d2, perplexity);
    p *= opts_.early_exaggeration;

    Rng rng(seed);
    MatrixXd y(n, 2);
    if (opts_.pca_init) {
        y = pca_2d(points);
        for (int c = 0; c < 2; ++c) {
            const double sd = std::sqrt(y.col(c).squaredNorm() / n);
            if (sd > 0.0) y.col(c) *= 1e-4 / sd;
        }
    } else {
        y.setZero();
    }
    for (int i = 0; i < n; ++i) {
        y(i, 0) += opts_.init_jitter * rng.normal();
        y(i, 1) += opts_.init_jitter * rng.normal();
    }

    MatrixXd velocity = MatrixXd::Zero(n, 2);
    MatrixXd gains = MatrixXd::Ones(n, 2);
    MatrixXd w(n, n), grad(n, 2);
    for (int iter = 0; iter < opts_.iterations; ++iter) {
        if (iter == opts_.exaggeration_iters) p /= opts_.early_exaggeration;
        // Student-t responsibilities in the embedding.
        double z = 0.0;
        for (int i = 0; i < n; ++i) {
            w(i, i) = 0.0;
            for (int j = i + 1; j < n; ++j) {
                const double wij = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
                w(i, j) = wij;
                w(j, i) = wij;
                z += 2.0 * wij;
            }
        }
        grad.setZero();
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                const double coeff = 4.0 * (p(i, j) - w(i, j) / z) * w(i, j);
                grad.row(i) += coeff * (y.row(i) - y.row(j));
            }
        }
        const double momentum = iter < opts_.momentum_switch ? opts_.initial_momentum : opts_.final_momentum;
        for (int i = 0; i < n; ++i) {
            for (int c = 0; c < 2; ++c) {
                const bool same_sign = (grad(i, c) > 0.0) == (velocity(i, c) > 0.0);
                gains(i, c) = same_sign ? std::max(gains(i, c) * 0.8, 0.01) : gains(i, c) + 0.2;
                velocity(i, c) = momentum * velocity(i, c) - opts_.learning_rate * gains(i, c) * grad(i, c);
            }
        }
        y += velocity;
        y.rowwise() -= y.colwise().mean();
    }
    return y;
}

}  // namespace posecast
