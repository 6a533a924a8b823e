#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "posecast/tensor.hpp"

namespace posecast {

// Prior function families mapping (joint j, future frame t) to an aleatoric
// uncertainty value u. t is the 1-based future-frame index, dimensionless.
enum class PriorFamily { Id, Poly, Sig3, Sig5 };

// Task scope: one parameter row per joint, or a single row shared by all.
enum class PriorScope { TimeJoint, TimeOnly };

std::string to_string(PriorFamily f);
std::string to_string(PriorScope s);
PriorFamily prior_family_from_string(const std::string& s);
PriorScope prior_scope_from_string(const std::string& s);

struct PriorParams {
    PriorFamily family = PriorFamily::Sig5;
    PriorScope scope = PriorScope::TimeJoint;
    int degree = 0;  // Poly only
    int horizon = 0; // T
    int joints = 0;  // J
    MatrixXd theta;  // (J x P) for TimeJoint, (1 x P) for TimeOnly

    int params_per_row() const;           // P
    int param_count() const;              // rows * P
    int theta_rows() const { return scope == PriorScope::TimeJoint ? joints : 1; }
    int row_for_joint(int joint) const { return scope == PriorScope::TimeJoint ? joint : 0; }
    void validate() const;

    nlohmann::ordered_json to_json() const;
    static PriorParams from_json(const nlohmann::json& j);
};

// u_t^j per the family formula. Precondition: 1 <= t <= T, 0 <= j < J.
double eval_prior(const PriorParams& p, int joint, int t);

// Full (T x J) grid; grid(t-1, j) == eval_prior(p, j, t).
MatrixXd eval_prior_grid(const PriorParams& p);

// Analytic d u_t^j / d theta_row for the row owning (joint, t). Length P.
VectorXd eval_prior_grad_theta(const PriorParams& p, int joint, int t);

// Accumulates dL/dtheta given dL/du over the whole grid (T x J).
MatrixXd prior_grad_from_grid(const PriorParams& p, const MatrixXd& du_grid);

// Deterministic initialization; seed reserved for optional jitter (off).
PriorParams init_prior(PriorFamily family, PriorScope scope, int horizon, int joints,
                       int degree = 0, std::uint64_t seed = 0);

}  // namespace posecast
