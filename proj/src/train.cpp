#include "posecast/train.hpp"

#include <cmath>

#include "posecast/error.hpp"
#include "posecast/loss.hpp"
#include "posecast/metrics.hpp"

namespace posecast {

bool is_validation_sample(const ForecastSample& s) { return fnv1a(s.source_id) % 10 == 0; }

namespace {

void check_dataset(const std::vector<ForecastSample>& dataset) {
    if (dataset.empty()) throw Error::validation("train: dataset is empty");
    const int O = dataset[0].observed_frames();
    const int T = dataset[0].future_frames();
    const int J = dataset[0].num_joints();
    for (const auto& s : dataset) {
        if (s.observed_frames() != O || s.future_frames() != T || s.num_joints() != J) {
            throw Error::validation("train: samples have inconsistent (O, T, J)");
        }
    }
}

// Packs sample windows for the batched forward: observed (B x O*3J) and
// targets ((B*T*J) x 3) in (b, t, j) row order.
void pack_batch(const std::vector<ForecastSample>& dataset, const std::vector<int>& ids,
                MotionMatrix& observed, MatrixXd& targets) {
    const int O = dataset[ids[0]].observed_frames();
    const int T = dataset[ids[0]].future_frames();
    const int J = dataset[ids[0]].num_joints();
    const int B = static_cast<int>(ids.size());
    observed.resize(B, O * 3 * J);
    targets.resize(static_cast<long>(B) * T * J, 3);
    for (int b = 0; b < B; ++b) {
        const ForecastSample& s = dataset[ids[b]];
        for (int f = 0; f < O; ++f) {
            observed.block(b, f * 3 * J, 1, 3 * J) = to_double(s.observed).row(f);
        }
        for (int t = 0; t < T; ++t) {
            for (int j = 0; j < J; ++j) {
                targets.row((static_cast<long>(b) * T + t) * J + j) =
                    to_double(s.future).block<1, 3>(t, 3 * j);
            }
        }
    }
}

double validation_a_mpjpe(const STTransModel& model, const std::vector<ForecastSample>& dataset,
                          const std::vector<int>& val_ids) {
    double acc = 0.0;
    for (int id : val_ids) {
        const ForecastSample& s = dataset[id];
        acc += a_mpjpe(to_double(s.future), model.forecast(s.observed));
    }
    return acc / static_cast<double>(val_ids.size());
}

Checkpoint train_zero_vel(const std::vector<ForecastSample>& dataset, const TrainConfig& cfg) {
    Checkpoint ckpt;
    ckpt.kind = ForecasterKind::ZeroVel;
    ckpt.observed = dataset[0].observed_frames();
    ckpt.horizon = dataset[0].future_frames();
    ckpt.joints = dataset[0].num_joints();
    ckpt.train_cfg = cfg;
    double acc = 0.0;
    for (const auto& s : dataset) {
        acc += a_mpjpe(to_double(s.future), zero_vel_forecast(s.observed, ckpt.horizon).y_hat);
    }
    acc /= static_cast<double>(dataset.size());
    for (int e = 1; e <= cfg.epochs; ++e) ckpt.epoch_log.push_back({e, 0.0, acc});
    return ckpt;
}

}  // namespace

Checkpoint train(ForecasterKind kind, const std::vector<ForecastSample>& dataset,
                 const TrainConfig& cfg, const TrainHooks* hooks) {
    check_dataset(dataset);
    if (cfg.epochs < 0 || cfg.batch_size < 1) throw Error::validation("train: bad epochs/batch_size");
    if (kind == ForecasterKind::ZeroVel) return train_zero_vel(dataset, cfg);

    const int O = dataset[0].observed_frames();
    const int T = dataset[0].future_frames();
    const int J = dataset[0].num_joints();

    std::vector<int> train_ids, val_ids;
    for (int i = 0; i < static_cast<int>(dataset.size()); ++i) {
        (is_validation_sample(dataset[i]) ? val_ids : train_ids).push_back(i);
    }
    if (train_ids.empty()) throw Error::validation("train: validation split left no training samples");
    if (val_ids.empty()) val_ids = train_ids;  // tiny datasets: validate on the training windows

    Checkpoint ckpt;
    ckpt.kind = ForecasterKind::STTrans;
    ckpt.observed = O;
    ckpt.horizon = T;
    ckpt.joints = J;
    ckpt.train_cfg = cfg;
    ckpt.model.emplace(cfg.model, O, T, J, cfg.seed);
    STTransModel& model = *ckpt.model;

    std::optional<PriorParams> prior;
    nn::Param theta_param;
    std::vector<nn::Param*> params = model.params();
    if (cfg.prior) {
        prior = init_prior(cfg.prior->family, cfg.prior->scope, T, J, cfg.prior->degree, cfg.seed);
        theta_param.init("prior.theta", prior->theta);
        params.push_back(&theta_param);
    }

    nn::Adam opt;
    opt.lr = cfg.learning_rate;
    opt.clip_norm = cfg.clip_norm;
    opt.attach(params);

    Rng dropout_rng(derive_seed(cfg.seed, "dropout"));
    int global_step = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng order_rng(derive_seed(cfg.seed, "epoch_order_" + std::to_string(epoch)));
        std::vector<int> order = train_ids;
        order_rng.shuffle(order);

        double loss_acc = 0.0;
        long seen = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const std::vector<int> ids(order.begin() + start, order.begin() + end);
            const int B = static_cast<int>(ids.size());

            MotionMatrix observed;
            MatrixXd targets;
            pack_batch(dataset, ids, observed, targets);

            nn::zero_grads(params);
            nn::Graph g;
            nn::Ctx ctx{g, true, &dropout_rng};
            const nn::Var y_hat = model.forward(ctx, observed);

            nn::Var loss;
            nn::Param u_param;
            if (prior) {
                prior->theta = theta_param.value;
                u_param.init("u_grid", eval_prior_grid(*prior));
                const nn::Var u = g.param(u_param);
                loss = g.pual_batch(y_hat, u, targets, B, T, J);
            } else {
                loss = g.l2_batch(y_hat, targets, B, T, J);
            }
            const double loss_value = loss.value()(0, 0);
            if (!std::isfinite(loss_value)) {
                throw Error::runtime("train: diverged (non-finite loss) at epoch " + std::to_string(epoch));
            }
            g.backward(loss);
            if (prior) {
                theta_param.grad += prior_grad_from_grid(*prior, u_param.grad);
            }
            opt.step();

            if (hooks && hooks->on_step) {
                TrainStepInfo info{epoch,
                                   global_step,
                                   loss_value,
                                   prior ? &u_param.value : nullptr,
                                   &targets,
                                   &y_hat.value(),
                                   B};
                hooks->on_step(info);
            }
            loss_acc += loss_value * B;
            seen += B;
            ++global_step;
        }
        const double val = validation_a_mpjpe(model, dataset, val_ids);
        ckpt.epoch_log.push_back({epoch, seen > 0 ? loss_acc / seen : 0.0, val});
    }

    if (prior) {
        prior->theta = theta_param.value;
        ckpt.prior = prior;
    }
    return ckpt;
}

}  // namespace posecast
