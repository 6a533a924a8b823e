#pragma once

#include <cstdint>

#include "posecast/tensor.hpp"

namespace posecast {

// Decomposition of the uncertainty-aware loss over one (T, J) grid.
struct LossBreakdown {
    double total = 0.0;                // weighted_error_term + regularizer_term
    double weighted_error_term = 0.0;  // sum e^{-u} * ||y - y_hat||
    double regularizer_term = 0.0;     // sum u
    MatrixXd per_cell_error;           // (T x J), Euclidean error per cell, mm
};

// total = sum_{t,j} [ e^{-u_t^j} * ||y_t^j - y_hat_t^j||_2 + u_t^j ].
// y, y_hat are (T x 3J); u is (T x J).
LossBreakdown pual_loss(const MotionMatrix& y, const MotionMatrix& y_hat, const MatrixXd& u);

// sum_{t,j} ||y_t^j - y_hat_t^j||_2; equals pual_loss(...).total at u == 0.
double plain_l2_loss(const MotionMatrix& y, const MotionMatrix& y_hat);

struct PualGradient {
    MotionMatrix d_y_hat;  // (T x 3J)
    MatrixXd d_u;          // (T x J)
};

// Analytic gradients of pual_loss. At a zero-error cell the norm gradient is
// defined as the zero vector (subgradient convention).
PualGradient pual_loss_gradient(const MotionMatrix& y, const MotionMatrix& y_hat, const MatrixXd& u);

struct LossGradCheckReport {
    double max_rel_dev_y_hat = 0.0;
    double max_rel_dev_u = 0.0;
    int cells_checked = 0;
};

// Compares analytic gradients against central finite differences (step 1e-5)
// on seeded random small tensors.
LossGradCheckReport loss_gradient_check(std::uint64_t seed, int horizon = 2, int joints = 2);

}  // namespace posecast
