#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "posecast/error.hpp"
#include "posecast/loss.hpp"
#include "posecast/metrics.hpp"
#include "posecast/rng.hpp"

using namespace posecast;

namespace {

MotionMatrix random_motion(Rng& rng, int frames, int joints, double scale = 1.0) {
    MotionMatrix m(frames, 3 * joints);
    for (int f = 0; f < frames; ++f)
        for (int c = 0; c < 3 * joints; ++c) m(f, c) = scale * rng.normal();
    return m;
}

// Independent 1-D minimizer (golden section) for the per-cell objective.
double golden_min(const std::function<double(double)>& f, double lo, double hi, int iters = 200) {
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - phi * (b - a), d = a + phi * (b - a);
    for (int i = 0; i < iters; ++i) {
        if (f(c) < f(d)) {
            b = d;
        } else {
            a = c;
        }
        c = b - phi * (b - a);
        d = a + phi * (b - a);
    }
    return (a + b) / 2;
}

}  // namespace

TEST_CASE("pual loss zero error zero u") {
    MotionMatrix y = MotionMatrix::Zero(2, 6);
    MatrixXd u = MatrixXd::Zero(2, 2);
    const LossBreakdown b = pual_loss(y, y, u);
    CHECK(b.total == 0.0);
    CHECK(b.weighted_error_term == 0.0);
    CHECK(b.regularizer_term == 0.0);
}

TEST_CASE("pual loss single cell values") {
    MotionMatrix y = MotionMatrix::Zero(1, 3);
    MotionMatrix y_hat(1, 3);
    y_hat << 3.0, 0.0, 0.0;
    MatrixXd u(1, 1);
    u << 1.0;
    const LossBreakdown b = pual_loss(y, y_hat, u);
    CHECK(b.total == doctest::Approx(3.0 * std::exp(-1.0) + 1.0).epsilon(1e-12));
    CHECK(b.per_cell_error(0, 0) == doctest::Approx(3.0));
    CHECK(b.total == doctest::Approx(b.weighted_error_term + b.regularizer_term).epsilon(1e-12));
}

TEST_CASE("optimal u recovers ln E") {
    // Minimizing e^{-u} E + u over u gives u* = ln E, minimum 1 + ln E.
    for (double e : {0.5, 2.0, 17.0}) {
        const double u_star = golden_min([e](double u) { return std::exp(-u) * e + u; }, -10, 10);
        CHECK(u_star == doctest::Approx(std::log(e)).epsilon(1e-6));
        CHECK(std::exp(-u_star) * e + u_star == doctest::Approx(1.0 + std::log(e)).epsilon(1e-8));
    }
}

TEST_CASE("plain l2 matches pual at u = 0") {
    Rng rng(1);
    const MotionMatrix y = random_motion(rng, 4, 3);
    const MotionMatrix y_hat = random_motion(rng, 4, 3);
    const MatrixXd u = MatrixXd::Zero(4, 3);
    CHECK(plain_l2_loss(y, y_hat) == doctest::Approx(pual_loss(y, y_hat, u).total).epsilon(1e-12));

    MotionMatrix a = MotionMatrix::Zero(1, 3), b(1, 3);
    b << 3.0, 0.0, 4.0;
    CHECK(plain_l2_loss(a, b) == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(plain_l2_loss(a, a) == 0.0);
}

TEST_CASE("loss errors on bad input") {
    MotionMatrix y = MotionMatrix::Zero(2, 6), y_hat = MotionMatrix::Zero(3, 6);
    MatrixXd u = MatrixXd::Zero(2, 2);
    CHECK_THROWS_AS(pual_loss(y, y_hat, u), Error);
    MotionMatrix bad = MotionMatrix::Zero(2, 6);
    bad(0, 0) = std::nan("");
    CHECK_THROWS_AS(pual_loss(y, bad, u), Error);
    CHECK_THROWS_AS(plain_l2_loss(y, y_hat), Error);
}

TEST_CASE("down-weighting is strictly monotone in u") {
    MotionMatrix y = MotionMatrix::Zero(1, 3), y_hat(1, 3);
    y_hat << 2.0, 1.0, 2.0;
    double prev = std::numeric_limits<double>::infinity();
    for (double uu : {-1.0, 0.0, 0.5, 1.0, 3.0}) {
        MatrixXd u(1, 1);
        u << uu;
        const double weighted = pual_loss(y, y_hat, u).weighted_error_term;
        CHECK(weighted < prev);
        prev = weighted;
    }
}

TEST_CASE("permutation equivariance of the total") {
    Rng rng(2);
    const int J = 5;
    const MotionMatrix y = random_motion(rng, 3, J);
    const MotionMatrix y_hat = random_motion(rng, 3, J);
    MatrixXd u(3, J);
    for (int t = 0; t < 3; ++t)
        for (int j = 0; j < J; ++j) u(t, j) = rng.uniform(-1, 1);
    const double base = pual_loss(y, y_hat, u).total;

    const auto perm = Rng(9).permutation(J);
    MotionMatrix yp(3, 3 * J), yhp(3, 3 * J);
    MatrixXd up(3, J);
    for (int j = 0; j < J; ++j) {
        yp.middleCols(3 * j, 3) = y.middleCols(3 * perm[j], 3);
        yhp.middleCols(3 * j, 3) = y_hat.middleCols(3 * perm[j], 3);
        up.col(j) = u.col(perm[j]);
    }
    CHECK(pual_loss(yp, yhp, up).total == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("loss gradient check against finite differences") {
    const LossGradCheckReport r = loss_gradient_check(0, 2, 2);
    CHECK(r.max_rel_dev_y_hat < 1e-4);
    CHECK(r.max_rel_dev_u < 1e-4);
    CHECK(r.cells_checked == 4);
}

TEST_CASE("gradient wrt u at u = 0 is 1 - error") {
    MotionMatrix y = MotionMatrix::Zero(1, 6), y_hat(1, 6);
    y_hat << 0.3, 0.0, 0.4, 1.0, 2.0, 2.0;
    MatrixXd u = MatrixXd::Zero(1, 2);
    const PualGradient g = pual_loss_gradient(y, y_hat, u);
    CHECK(g.d_u(0, 0) == doctest::Approx(1.0 - 0.5).epsilon(1e-12));
    CHECK(g.d_u(0, 1) == doctest::Approx(1.0 - 3.0).epsilon(1e-12));

    // Zero-error cell: subgradient convention gives the zero vector.
    const PualGradient gz = pual_loss_gradient(y, y, u);
    CHECK(gz.d_y_hat.isZero());
    CHECK(gz.d_u(0, 0) == doctest::Approx(1.0));
}

// ---- metrics ----

TEST_CASE("mpjpe basics") {
    MotionMatrix y = MotionMatrix::Zero(2, 6);
    CHECK(mpjpe(y, y).isZero());

    MotionMatrix off = y;
    for (int t = 0; t < 2; ++t)
        for (int j = 0; j < 2; ++j) {
            off(t, 3 * j) += 3.0;
            off(t, 3 * j + 2) += 4.0;
        }
    const VectorXd v = mpjpe(y, off);
    CHECK(v[0] == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(v[1] == doctest::Approx(5.0).epsilon(1e-12));

    MotionMatrix two = MotionMatrix::Zero(1, 6);
    two(0, 0) = 1.0;  // joint 0 offset (1,0,0)
    two(0, 4) = 2.0;  // joint 1 offset (0,2,0)
    CHECK(mpjpe(MotionMatrix::Zero(1, 6), two)[0] == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("a_mpjpe composes with mpjpe") {
    MotionMatrix y = MotionMatrix::Zero(2, 3), y_hat = y;
    y_hat(0, 0) = 1.0;
    y_hat(1, 1) = 3.0;
    CHECK(a_mpjpe(y, y_hat) == doctest::Approx(2.0).epsilon(1e-12));

    Rng rng(4);
    const MotionMatrix a = random_motion(rng, 7, 4), b = random_motion(rng, 7, 4);
    CHECK(a_mpjpe(a, b) == doctest::Approx(mpjpe(a, b).mean()).epsilon(1e-12));
    CHECK(a_mpjpe(a, b) == doctest::Approx(a_mpjpe(b, a)).epsilon(1e-12));
}

TEST_CASE("ap_mpjpe") {
    Rng rng(5);
    const MotionMatrix base = random_motion(rng, 4, 2, 10.0);
    std::vector<std::vector<MotionMatrix>> identical(3, {base, base});
    CHECK(ap_mpjpe(identical) == 0.0);

    MotionMatrix shifted = base;
    for (int j = 0; j < 2; ++j) shifted.col(3 * j + 2).array() += 5.0;
    std::vector<std::vector<MotionMatrix>> two = {{base}, {shifted}};
    CHECK(ap_mpjpe(two) == doctest::Approx(5.0).epsilon(1e-12));

    // R = 3: matches brute force over the 3 unordered pairs.
    const MotionMatrix r0 = random_motion(rng, 3, 2), r1 = random_motion(rng, 3, 2),
                       r2 = random_motion(rng, 3, 2);
    std::vector<std::vector<MotionMatrix>> three = {{r0}, {r1}, {r2}};
    const double brute = (a_mpjpe(r0, r1) + a_mpjpe(r0, r2) + a_mpjpe(r1, r2)) / 3.0;
    CHECK(ap_mpjpe(three) == doctest::Approx(brute).epsilon(1e-12));

    // Invariant under run reordering.
    std::vector<std::vector<MotionMatrix>> reordered = {{r2}, {r0}, {r1}};
    CHECK(ap_mpjpe(reordered) == doctest::Approx(ap_mpjpe(three)).epsilon(1e-12));

    CHECK_THROWS_AS(ap_mpjpe({{base}}), Error);
}

TEST_CASE("auroc") {
    CHECK(auroc({0.1, 0.2}, {0.9, 1.0}) == doctest::Approx(1.0));
    CHECK(auroc({0.3, 0.7}, {0.3, 0.7}) == doctest::Approx(0.5));
    // Brute force over all 4 pairs: (0.15>0.1), (0.15<0.2), (0.3>0.1), (0.3>0.2) -> 3/4.
    CHECK(auroc({0.1, 0.2}, {0.15, 0.3}) == doctest::Approx(0.75));
    CHECK_THROWS_AS(auroc({}, {0.1}), Error);

    // auroc(A,B) + auroc(B,A) == 1 for tie-free inputs; invariant under
    // strictly increasing transforms.
    Rng rng(6);
    std::vector<double> neg, pos;
    for (int i = 0; i < 37; ++i) neg.push_back(rng.normal());
    for (int i = 0; i < 23; ++i) pos.push_back(rng.normal() + 0.4);
    const double ab = auroc(neg, pos);
    CHECK(ab + auroc(pos, neg) == doctest::Approx(1.0).epsilon(1e-12));
    auto transform = [](std::vector<double> v) {
        for (double& x : v) x = std::exp(0.3 * x) + x;
        return v;
    };
    CHECK(auroc(transform(neg), transform(pos)) == doctest::Approx(ab).epsilon(1e-12));
}

TEST_CASE("roc point list brackets the auroc") {
    const auto pts = roc_points({0.1, 0.2}, {0.15, 0.3});
    CHECK(pts.front().fpr == 0.0);
    CHECK(pts.front().tpr == 0.0);
    CHECK(pts.back().fpr == 1.0);
    CHECK(pts.back().tpr == 1.0);
}

TEST_CASE("horizon frame mapping at 25 fps") {
    CHECK(horizon_frame_index(80, 25, 25) == 2);
    CHECK(horizon_frame_index(160, 25, 25) == 4);
    CHECK(horizon_frame_index(320, 25, 25) == 8);
    CHECK(horizon_frame_index(400, 25, 25) == 10);
    CHECK(horizon_frame_index(560, 25, 25) == 14);
    CHECK(horizon_frame_index(720, 25, 25) == 18);
    CHECK(horizon_frame_index(880, 25, 25) == 22);
    CHECK(horizon_frame_index(1000, 25, 25) == 25);
    CHECK_THROWS_AS(horizon_frame_index(1040, 25, 25), Error);  // beyond T
    CHECK_THROWS_AS(horizon_frame_index(90, 25, 25), Error);    // not on the frame grid
}

TEST_CASE("horizon table averages over samples") {
    // Constant-future samples and a zero-velocity-style forecaster.
    ForecastSample s;
    s.observed = FrameMatrix::Zero(2, 6);
    s.future = FrameMatrix::Zero(4, 6);
    s.future.row(1).setConstant(1.0f);
    ForecastSample s2 = s;
    s2.future.row(1).setConstant(3.0f);
    const auto table = horizon_table(
        {s, s2}, [](const ForecastSample& in) { return MotionMatrix::Zero(in.future_frames(), 6); },
        {40.0, 80.0}, 25.0);
    REQUIRE(table.mpjpe_mm.size() == 2);
    CHECK(table.mpjpe_mm[0] == doctest::Approx(0.0));
    // frame 2: errors sqrt(3) and 3*sqrt(3) averaged
    CHECK(table.mpjpe_mm[1] == doctest::Approx(2.0 * std::sqrt(3.0)).epsilon(1e-12));
    CHECK(table.num_samples == 2);
}
