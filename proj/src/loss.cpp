#include "posecast/loss.hpp"

#include <cmath>

#include "posecast/error.hpp"
#include "posecast/rng.hpp"

namespace posecast {

namespace {

void check_shapes(const MotionMatrix& y, const MotionMatrix& y_hat, const MatrixXd* u) {
    if (y.rows() != y_hat.rows() || y.cols() != y_hat.cols()) {
        throw Error::validation("loss: y and y_hat shapes differ");
    }
    if (y.cols() % 3 != 0 || y.cols() < 3) throw Error::validation("loss: columns must be 3*J");
    if (u != nullptr && (u->rows() != y.rows() || u->cols() != y.cols() / 3)) {
        throw Error::validation("loss: u must be (T x J)");
    }
    if (!y.allFinite() || !y_hat.allFinite()) throw Error::validation("loss: non-finite pose input");
    if (u != nullptr && !u->allFinite()) throw Error::validation("loss: non-finite u input");
}

}  // namespace

LossBreakdown pual_loss(const MotionMatrix& y, const MotionMatrix& y_hat, const MatrixXd& u) {
    check_shapes(y, y_hat, &u);
    const int frames = static_cast<int>(y.rows());
    const int joints = static_cast<int>(y.cols()) / 3;
    LossBreakdown out;
    out.per_cell_error.resize(frames, joints);
    for (int t = 0; t < frames; ++t) {
        for (int j = 0; j < joints; ++j) {
            const double err = (y.block<1, 3>(t, 3 * j) - y_hat.block<1, 3>(t, 3 * j)).norm();
            out.per_cell_error(t, j) = err;
            out.weighted_error_term += std::exp(-u(t, j)) * err;
            out.regularizer_term += u(t, j);
        }
    }
    out.total = out.weighted_error_term + out.regularizer_term;
    return out;
}

double plain_l2_loss(const MotionMatrix& y, const MotionMatrix& y_hat) {
    check_shapes(y, y_hat, nullptr);
    const int joints = static_cast<int>(y.cols()) / 3;
    double total = 0.0;
    for (int t = 0; t < y.rows(); ++t) {
        for (int j = 0; j < joints; ++j) {
            total += (y.block<1, 3>(t, 3 * j) - y_hat.block<1, 3>(t, 3 * j)).norm();
        }
    }
    return total;
}

PualGradient pual_loss_gradient(const MotionMatrix& y, const MotionMatrix& y_hat, const MatrixXd& u) {
    check_shapes(y, y_hat, &u);
    const int frames = static_cast<int>(y.rows());
    const int joints = static_cast<int>(y.cols()) / 3;
    PualGradient g;
    g.d_y_hat = MotionMatrix::Zero(frames, 3 * joints);
    g.d_u.resize(frames, joints);
    for (int t = 0; t < frames; ++t) {
        for (int j = 0; j < joints; ++j) {
            const Eigen::RowVector3d diff = y_hat.block<1, 3>(t, 3 * j) - y.block<1, 3>(t, 3 * j);
            const double err = diff.norm();
            const double w = std::exp(-u(t, j));
            if (err > 0.0) g.d_y_hat.block<1, 3>(t, 3 * j) = w * diff / err;
            g.d_u(t, j) = 1.0 - w * err;
        }
    }
    return g;
}

LossGradCheckReport loss_gradient_check(std::uint64_t seed, int horizon, int joints) {
    Rng rng(seed);
    MotionMatrix y(horizon, 3 * joints), y_hat(horizon, 3 * joints);
    MatrixXd u(horizon, joints);
    for (int t = 0; t < horizon; ++t) {
        for (int c = 0; c < 3 * joints; ++c) {
            y(t, c) = rng.normal();
            y_hat(t, c) = rng.normal();
        }
        for (int j = 0; j < joints; ++j) u(t, j) = rng.uniform(-1.0, 1.0);
    }

    const PualGradient analytic = pual_loss_gradient(y, y_hat, u);
    const double h = 1e-5;
    LossGradCheckReport report;
    auto rel_dev = [](double a, double b) {
        const double scale = std::max({std::abs(a), std::abs(b), 1e-8});
        return std::abs(a - b) / scale;
    };
    for (int t = 0; t < horizon; ++t) {
        for (int c = 0; c < 3 * joints; ++c) {
            MotionMatrix hi = y_hat, lo = y_hat;
            hi(t, c) += h;
            lo(t, c) -= h;
            const double fd = (pual_loss(y, hi, u).total - pual_loss(y, lo, u).total) / (2 * h);
            report.max_rel_dev_y_hat = std::max(report.max_rel_dev_y_hat, rel_dev(fd, analytic.d_y_hat(t, c)));
        }
        for (int j = 0; j < joints; ++j) {
            MatrixXd hi = u, lo = u;
            hi(t, j) += h;
            lo(t, j) -= h;
            const double fd = (pual_loss(y, y_hat, hi).total - pual_loss(y, y_hat, lo).total) / (2 * h);
            report.max_rel_dev_u = std::max(report.max_rel_dev_u, rel_dev(fd, analytic.d_u(t, j)));
            ++report.cells_checked;
        }
    }
    return report;
}

}  // namespace posecast
