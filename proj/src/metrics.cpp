#include "posecast/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "posecast/error.hpp"

namespace posecast {

namespace {

void check_pair(const MotionMatrix& y, const MotionMatrix& y_hat) {
    if (y.rows() != y_hat.rows() || y.cols() != y_hat.cols()) {
        throw Error::validation("metrics: y and y_hat shapes differ");
    }
    if (y.cols() % 3 != 0 || y.cols() < 3) throw Error::validation("metrics: columns must be 3*J");
}

}  // namespace

VectorXd mpjpe(const MotionMatrix& y, const MotionMatrix& y_hat) {
    check_pair(y, y_hat);
    const int frames = static_cast<int>(y.rows());
    const int joints = static_cast<int>(y.cols()) / 3;
    VectorXd out(frames);
    for (int t = 0; t < frames; ++t) {
        double acc = 0.0;
        for (int j = 0; j < joints; ++j) {
            acc += (y.block<1, 3>(t, 3 * j) - y_hat.block<1, 3>(t, 3 * j)).norm();
        }
        out[t] = acc / joints;
    }
    return out;
}

double a_mpjpe(const MotionMatrix& y, const MotionMatrix& y_hat) {
    return mpjpe(y, y_hat).mean();
}

double ap_mpjpe(const std::vector<std::vector<MotionMatrix>>& predictions) {
    const int runs = static_cast<int>(predictions.size());
    if (runs < 2) throw Error::validation("ap_mpjpe: needs at least 2 runs");
    const std::size_t samples = predictions[0].size();
    for (const auto& run : predictions) {
        if (run.size() != samples) throw Error::validation("ap_mpjpe: runs cover different sample counts");
    }
    if (samples == 0) throw Error::validation("ap_mpjpe: no samples");
    double acc = 0.0;
    int pairs = 0;
    for (int r = 0; r < runs; ++r) {
        for (int s = r + 1; s < runs; ++s) {
            double pair_acc = 0.0;
            for (std::size_t i = 0; i < samples; ++i) {
                pair_acc += a_mpjpe(predictions[r][i], predictions[s][i]);
            }
            acc += pair_acc / static_cast<double>(samples);
            ++pairs;
        }
    }
    return acc / pairs;
}

double auroc(const std::vector<double>& scores_negative, const std::vector<double>& scores_positive) {
    if (scores_negative.empty() || scores_positive.empty()) {
        throw Error::validation("auroc: both score lists must be non-empty");
    }
    // Exact rank-sum (Mann-Whitney) with midranks for ties.
    struct Entry {
        double score;
        bool positive;
    };
    std::vector<Entry> all;
    all.reserve(scores_negative.size() + scores_positive.size());
    for (double s : scores_negative) all.push_back({s, false});
    for (double s : scores_positive) all.push_back({s, true});
    std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.score < b.score; });

    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j + 1 < all.size() && all[j + 1].score == all[i].score) ++j;
        const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) {
            if (all[k].positive) rank_sum_pos += midrank;
        }
        i = j + 1;
    }
    const double np = static_cast<double>(scores_positive.size());
    const double nn = static_cast<double>(scores_negative.size());
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

std::vector<RocPoint> roc_points(const std::vector<double>& scores_negative,
                                 const std::vector<double>& scores_positive) {
    if (scores_negative.empty() || scores_positive.empty()) {
        throw Error::validation("roc: both score lists must be non-empty");
    }
    std::vector<double> thresholds;
    thresholds.insert(thresholds.end(), scores_negative.begin(), scores_negative.end());
    thresholds.insert(thresholds.end(), scores_positive.begin(), scores_positive.end());
    std::sort(thresholds.begin(), thresholds.end(), std::greater<double>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    std::vector<RocPoint> points;
    points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    for (double th : thresholds) {
        const auto count_ge = [th](const std::vector<double>& v) {
            return static_cast<double>(std::count_if(v.begin(), v.end(), [th](double s) { return s >= th; }));
        };
        points.push_back({th, count_ge(scores_negative) / scores_negative.size(),
                          count_ge(scores_positive) / scores_positive.size()});
    }
    return points;
}

int horizon_frame_index(double horizon_ms, double fps, int max_frames) {
    const double frame_period_ms = 1000.0 / fps;
    const double frames = horizon_ms / frame_period_ms;
    const int idx = static_cast<int>(std::lround(frames));
    if (std::abs(frames - idx) > 1e-6) {
        throw Error::validation("horizon " + std::to_string(horizon_ms) +
                                " ms is not a multiple of the frame period " +
                                std::to_string(frame_period_ms) + " ms");
    }
    if (idx < 1 || idx > max_frames) {
        throw Error::validation("horizon " + std::to_string(horizon_ms) + " ms maps to frame " +
                                std::to_string(idx) + ", outside 1.." + std::to_string(max_frames));
    }
    return idx;
}

HorizonTable horizon_table(const std::vector<ForecastSample>& samples, const ForecastFn& forecaster,
                           const std::vector<double>& horizons_ms, double fps) {
    if (samples.empty()) throw Error::validation("horizon_table: no samples");
    const int future = samples[0].future_frames();
    HorizonTable table;
    table.horizons_ms = horizons_ms;
    table.num_samples = static_cast<int>(samples.size());
    std::vector<int> frame_idx;
    for (double h : horizons_ms) frame_idx.push_back(horizon_frame_index(h, fps, future));

    VectorXd acc = VectorXd::Zero(future);
    for (const auto& s : samples) {
        const MotionMatrix pred = forecaster(s);
        acc += mpjpe(to_double(s.future), pred);
    }
    acc /= static_cast<double>(samples.size());
    for (int idx : frame_idx) table.mpjpe_mm.push_back(acc[idx - 1]);
    return table;
}

}  // namespace posecast
