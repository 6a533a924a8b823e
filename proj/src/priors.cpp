#include "posecast/priors.hpp"

#include <cmath>

#include "posecast/error.hpp"

namespace posecast {

std::string to_string(PriorFamily f) {
    switch (f) {
        case PriorFamily::Id: return "id";
        case PriorFamily::Poly: return "poly";
        case PriorFamily::Sig3: return "sig3";
        case PriorFamily::Sig5: return "sig5";
    }
    return "?";
}

std::string to_string(PriorScope s) {
    return s == PriorScope::TimeJoint ? "time_joint" : "time";
}

PriorFamily prior_family_from_string(const std::string& s) {
    if (s == "id") return PriorFamily::Id;
    if (s == "poly") return PriorFamily::Poly;
    if (s == "sig3") return PriorFamily::Sig3;
    if (s == "sig5") return PriorFamily::Sig5;
    throw Error::config("unknown prior family '" + s + "' (expected id|poly|sig3|sig5)");
}

PriorScope prior_scope_from_string(const std::string& s) {
    if (s == "time_joint") return PriorScope::TimeJoint;
    if (s == "time") return PriorScope::TimeOnly;
    throw Error::config("unknown prior scope '" + s + "' (expected time_joint|time)");
}

int PriorParams::params_per_row() const {
    switch (family) {
        case PriorFamily::Id: return horizon;
        case PriorFamily::Poly: return degree + 1;
        case PriorFamily::Sig3: return 3;
        case PriorFamily::Sig5: return 5;
    }
    return 0;
}

int PriorParams::param_count() const { return theta_rows() * params_per_row(); }

void PriorParams::validate() const {
    if (horizon < 1 || joints < 1) throw Error::validation("prior: horizon and joints must be >= 1");
    if (family == PriorFamily::Poly && degree < 0) throw Error::validation("prior: poly degree must be >= 0");
    if (theta.rows() != theta_rows() || theta.cols() != params_per_row()) {
        throw Error::validation("prior: theta shape (" + std::to_string(theta.rows()) + ", " +
                                std::to_string(theta.cols()) + ") does not match expected (" +
                                std::to_string(theta_rows()) + ", " + std::to_string(params_per_row()) + ")");
    }
    if (!theta.allFinite()) throw Error::validation("prior: theta contains non-finite values");
}

namespace {

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_index(const PriorParams& p, int joint, int t) {
    if (t < 1 || t > p.horizon) {
        throw Error::validation("prior: t = " + std::to_string(t) + " outside 1.." + std::to_string(p.horizon));
    }
    if (joint < 0 || joint >= p.joints) {
        throw Error::validation("prior: joint " + std::to_string(joint) + " outside 0.." +
                                std::to_string(p.joints - 1));
    }
}

struct Sig5Terms {
    double g, a, b, c, denom;
};

Sig5Terms sig5_terms(const Eigen::Ref<const Eigen::RowVectorXd>& th, int t) {
    const double th2 = th[2], th3 = th[3], th4 = th[4];
    const double s = th2 + th4;
    if (s == 0.0) {
        throw Error::validation("prior: Sig5 singular rate, theta2 + theta4 == 0");
    }
    Sig5Terms r;
    const double m = th3 - static_cast<double>(t);
    r.g = 2.0 * th2 * th4 / std::abs(s);
    r.a = logistic(r.g * m);  // 1 / (1 + exp(-g*(th3 - t)))
    r.b = std::exp(th2 * m);
    r.c = std::exp(th4 * m);
    r.denom = 1.0 + r.a * r.b + (1.0 - r.a) * r.c;
    return r;
}

}  // namespace

double eval_prior(const PriorParams& p, int joint, int t) {
    p.validate();
    check_index(p, joint, t);
    const auto th = p.theta.row(p.row_for_joint(joint));
    switch (p.family) {
        case PriorFamily::Id:
            return th[t - 1];
        case PriorFamily::Poly: {
            double acc = 0.0, power = 1.0;
            for (int k = 0; k <= p.degree; ++k) {
                acc += th[k] * power;
                power *= static_cast<double>(t);
            }
            return acc;
        }
        case PriorFamily::Sig3:
            return th[2] * logistic(th[0] * (static_cast<double>(t) - th[1]));
        case PriorFamily::Sig5: {
            const auto r = sig5_terms(th, t);
            return th[0] + th[1] / r.denom;
        }
    }
    throw Error::runtime("prior: unreachable family");
}

MatrixXd eval_prior_grid(const PriorParams& p) {
    p.validate();
    MatrixXd grid(p.horizon, p.joints);
    for (int t = 1; t <= p.horizon; ++t) {
        for (int j = 0; j < p.joints; ++j) grid(t - 1, j) = eval_prior(p, j, t);
    }
    return grid;
}

VectorXd eval_prior_grad_theta(const PriorParams& p, int joint, int t) {
    p.validate();
    check_index(p, joint, t);
    const auto th = p.theta.row(p.row_for_joint(joint));
    VectorXd g = VectorXd::Zero(p.params_per_row());
    const double td = static_cast<double>(t);
    switch (p.family) {
        case PriorFamily::Id:
            g[t - 1] = 1.0;
            break;
        case PriorFamily::Poly: {
            double power = 1.0;
            for (int k = 0; k <= p.degree; ++k) {
                g[k] = power;
                power *= td;
            }
            break;
        }
        case PriorFamily::Sig3: {
            const double s = logistic(th[0] * (td - th[1]));
            const double ds = s * (1.0 - s);
            g[0] = th[2] * ds * (td - th[1]);
            g[1] = -th[2] * ds * th[0];
            g[2] = s;
            break;
        }
        case PriorFamily::Sig5: {
            const auto r = sig5_terms(th, t);
            const double m = th[3] - td;
            const double th2 = th[2], th4 = th[4];
            const double s = th2 + th4;
            const double sgn = s > 0.0 ? 1.0 : -1.0;
            const double da_darg = r.a * (1.0 - r.a);  // d logistic(x)/dx at x = g*m
            const double dg_dth2 = (2.0 * th4 * std::abs(s) - 2.0 * th2 * th4 * sgn) / (s * s);
            const double dg_dth4 = (2.0 * th2 * std::abs(s) - 2.0 * th2 * th4 * sgn) / (s * s);
            const double da_dth2 = da_darg * m * dg_dth2;
            const double da_dth4 = da_darg * m * dg_dth4;
            const double da_dth3 = da_darg * r.g;
            const double db_dth2 = m * r.b;
            const double dc_dth4 = m * r.c;
            const double db_dth3 = th2 * r.b;
            const double dc_dth3 = th4 * r.c;
            const double dD_dth2 = da_dth2 * (r.b - r.c) + r.a * db_dth2;
            const double dD_dth3 = da_dth3 * (r.b - r.c) + r.a * db_dth3 + (1.0 - r.a) * dc_dth3;
            const double dD_dth4 = da_dth4 * (r.b - r.c) + (1.0 - r.a) * dc_dth4;
            const double factor = -th[1] / (r.denom * r.denom);
            g[0] = 1.0;
            g[1] = 1.0 / r.denom;
            g[2] = factor * dD_dth2;
            g[3] = factor * dD_dth3;
            g[4] = factor * dD_dth4;
            break;
        }
    }
    return g;
}

MatrixXd prior_grad_from_grid(const PriorParams& p, const MatrixXd& du_grid) {
    p.validate();
    if (du_grid.rows() != p.horizon || du_grid.cols() != p.joints) {
        throw Error::validation("prior: du grid shape mismatch");
    }
    MatrixXd grad = MatrixXd::Zero(p.theta.rows(), p.theta.cols());
    for (int t = 1; t <= p.horizon; ++t) {
        for (int j = 0; j < p.joints; ++j) {
            grad.row(p.row_for_joint(j)) += du_grid(t - 1, j) * eval_prior_grad_theta(p, j, t).transpose();
        }
    }
    return grad;
}

PriorParams init_prior(PriorFamily family, PriorScope scope, int horizon, int joints, int degree,
                       std::uint64_t /*seed*/) {
    PriorParams p;
    p.family = family;
    p.scope = scope;
    p.degree = degree;
    p.horizon = horizon;
    p.joints = joints;
    const int rows = p.theta_rows();
    const int cols = p.params_per_row();
    p.theta = MatrixXd::Zero(rows, cols);
    const double mid = static_cast<double>(horizon) / 2.0;
    switch (family) {
        case PriorFamily::Id:
        case PriorFamily::Poly:
            break;  // all zeros
        case PriorFamily::Sig3:
            for (int r = 0; r < rows; ++r) {
                p.theta(r, 0) = 0.2;
                p.theta(r, 1) = mid;
                p.theta(r, 2) = 1.0;
            }
            break;
        case PriorFamily::Sig5:
            for (int r = 0; r < rows; ++r) {
                p.theta(r, 0) = 0.0;
                p.theta(r, 1) = 1.0;
                p.theta(r, 2) = 0.2;
                p.theta(r, 3) = mid;
                p.theta(r, 4) = 0.2;
            }
            break;
    }
    // Keep theta on the float32 grid like every other learnable parameter.
    p.theta = p.theta.unaryExpr([](double v) { return snap_f32(v); });
    p.validate();
    return p;
}

nlohmann::ordered_json PriorParams::to_json() const {
    nlohmann::ordered_json j;
    j["family"] = to_string(family);
    j["scope"] = to_string(scope);
    j["d"] = degree;
    j["horizon"] = horizon;
    j["joints"] = joints;
    std::vector<double> flat(theta.size());
    for (int r = 0; r < theta.rows(); ++r)
        for (int c = 0; c < theta.cols(); ++c) flat[r * theta.cols() + c] = theta(r, c);
    j["theta"] = flat;
    return j;
}

PriorParams PriorParams::from_json(const nlohmann::json& j) {
    PriorParams p;
    p.family = prior_family_from_string(j.at("family").get<std::string>());
    p.scope = prior_scope_from_string(j.at("scope").get<std::string>());
    p.degree = j.at("d").get<int>();
    p.horizon = j.at("horizon").get<int>();
    p.joints = j.at("joints").get<int>();
    const auto flat = j.at("theta").get<std::vector<double>>();
    const int rows = p.theta_rows();
    const int cols = p.params_per_row();
    if (static_cast<int>(flat.size()) != rows * cols) {
        throw Error::format("prior: serialized theta has " + std::to_string(flat.size()) +
                            " values, expected " + std::to_string(rows * cols));
    }
    p.theta.resize(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) p.theta(r, c) = flat[r * cols + c];
    p.validate();
    return p;
}

}  // namespace posecast
