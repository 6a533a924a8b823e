#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "posecast/autograd.hpp"
#include "posecast/rng.hpp"
#include "posecast/tensor.hpp"

namespace posecast::nn {

using ad::Graph;
using ad::Param;
using ad::Var;

// Forward-pass context. In train mode parameters enter the tape as trainable
// leaves and dropout is active; in eval mode they enter as constants, so a
// const model can run forwards concurrently.
struct Ctx {
    Graph& g;
    bool train = false;
    Rng* dropout_rng = nullptr;

    Var leaf(const Param& p) {
        // Train mode is only reachable through a mutable model owned by the
        // trainer; eval mode never writes through this reference.
        return train ? g.param(const_cast<Param&>(p)) : g.constant(p.value);
    }
    Var drop(Var x, double rate) {
        if (!train || rate <= 0.0) return x;
        return g.dropout(x, rate, *dropout_rng);
    }
};

// y = x W + b with W (in x out).
struct Linear {
    Param weight, bias;

    void init(const std::string& name, int in, int out, Rng& rng);
    Var forward(Ctx& ctx, Var x) const;
    void collect(std::vector<Param*>& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }
};

struct LayerNorm {
    Param gamma, beta;

    void init(const std::string& name, int width);
    Var forward(Ctx& ctx, Var x) const;
    void collect(std::vector<Param*>& out) {
        out.push_back(&gamma);
        out.push_back(&beta);
    }
};

// Single-layer LSTM; weights packed (input x 4H) and (H x 4H), gate order
// [input, forget, cell, output].
struct Lstm {
    Param w_ih, w_hh, bias;
    int hidden = 0;

    void init(const std::string& name, int input, int hidden_size, Rng& rng);
    std::pair<Var, Var> step(Ctx& ctx, Var x, Var h, Var c) const;
    void collect(std::vector<Param*>& out) {
        out.push_back(&w_ih);
        out.push_back(&w_hh);
        out.push_back(&bias);
    }
};

// Adam with global gradient-norm clipping; parameter values are snapped to
// the float32 grid after every update.
struct Adam {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double clip_norm = 1.0;  // <= 0 disables clipping

    void attach(const std::vector<Param*>& params);
    void step();
    double last_grad_norm() const { return last_grad_norm_; }

private:
    std::vector<Param*> params_;
    std::vector<MatrixXd> m_, v_;
    long t_ = 0;
    double last_grad_norm_ = 0.0;
};

MatrixXd xavier_uniform(int rows, int cols, Rng& rng);

void zero_grads(const std::vector<Param*>& params);

}  // namespace posecast::nn
