#include "posecast/nn.hpp"

#include <cmath>

#include "posecast/error.hpp"

namespace posecast::nn {

MatrixXd xavier_uniform(int rows, int cols, Rng& rng) {
    const double a = std::sqrt(6.0 / (rows + cols));
    MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) m(r, c) = snap_f32(rng.uniform(-a, a));
    }
    return m;
}

void zero_grads(const std::vector<Param*>& params) {
    for (Param* p : params) p->zero_grad();
}

void Linear::init(const std::string& name, int in, int out, Rng& rng) {
    weight.init(name + ".weight", xavier_uniform(in, out, rng));
    bias.init(name + ".bias", MatrixXd::Zero(1, out));
}

Var Linear::forward(Ctx& ctx, Var x) const {
    return ctx.g.add_rowvec(ctx.g.matmul(x, ctx.leaf(weight)), ctx.leaf(bias));
}

void LayerNorm::init(const std::string& name, int width) {
    gamma.init(name + ".gamma", MatrixXd::Ones(1, width));
    beta.init(name + ".beta", MatrixXd::Zero(1, width));
}

Var LayerNorm::forward(Ctx& ctx, Var x) const {
    return ctx.g.layer_norm(x, ctx.leaf(gamma), ctx.leaf(beta));
}

void Lstm::init(const std::string& name, int input, int hidden_size, Rng& rng) {
    hidden = hidden_size;
    w_ih.init(name + ".w_ih", xavier_uniform(input, 4 * hidden_size, rng));
    w_hh.init(name + ".w_hh", xavier_uniform(hidden_size, 4 * hidden_size, rng));
    MatrixXd b = MatrixXd::Zero(1, 4 * hidden_size);
    b.middleCols(hidden_size, hidden_size).setOnes();  // forget gate bias 1
    bias.init(name + ".bias", b);
}

std::pair<Var, Var> Lstm::step(Ctx& ctx, Var x, Var h, Var c) const {
    Graph& g = ctx.g;
    Var pre = g.add(g.matmul(x, ctx.leaf(w_ih)), g.matmul(h, ctx.leaf(w_hh)));
    pre = g.add_rowvec(pre, ctx.leaf(bias));
    const Var gi = g.sigmoid_(g.slice_cols(pre, 0, hidden));
    const Var gf = g.sigmoid_(g.slice_cols(pre, hidden, hidden));
    const Var gc = g.tanh_(g.slice_cols(pre, 2 * hidden, hidden));
    const Var go = g.sigmoid_(g.slice_cols(pre, 3 * hidden, hidden));
    const Var c_next = g.add(g.hadamard(gf, c), g.hadamard(gi, gc));
    const Var h_next = g.hadamard(go, g.tanh_(c_next));
    return {h_next, c_next};
}

void Adam::attach(const std::vector<Param*>& params) {
    params_ = params;
    m_.clear();
    v_.clear();
    for (Param* p : params_) {
        m_.push_back(MatrixXd::Zero(p->value.rows(), p->value.cols()));
        v_.push_back(MatrixXd::Zero(p->value.rows(), p->value.cols()));
    }
    t_ = 0;
}

void Adam::step() {
    if (params_.empty()) throw Error::runtime("adam: no parameters attached");
    double norm_sq = 0.0;
    for (Param* p : params_) norm_sq += p->grad.squaredNorm();
    last_grad_norm_ = std::sqrt(norm_sq);
    double scale = 1.0;
    if (clip_norm > 0.0 && last_grad_norm_ > clip_norm) scale = clip_norm / last_grad_norm_;

    ++t_;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Param& p = *params_[i];
        const MatrixXd g = p.grad * scale;
        m_[i] = beta1 * m_[i] + (1.0 - beta1) * g;
        v_[i] = beta2 * v_[i] + (1.0 - beta2) * g.cwiseProduct(g);
        const MatrixXd m_hat = m_[i] / bc1;
        const MatrixXd v_hat = v_[i] / bc2;
        p.value -= lr * m_hat.cwiseQuotient((v_hat.cwiseSqrt().array() + eps).matrix());
        p.snap();
    }
}

}  // namespace posecast::nn
