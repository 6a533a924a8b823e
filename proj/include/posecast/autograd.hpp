#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "posecast/rng.hpp"
#include "posecast/tensor.hpp"

namespace posecast::ad {

// A learnable tensor living outside the tape; graphs accumulate into grad.
struct Param {
    std::string name;
    MatrixXd value;
    MatrixXd grad;

    void init(std::string n, MatrixXd v) {
        name = std::move(n);
        value = std::move(v);
        grad = MatrixXd::Zero(value.rows(), value.cols());
    }
    void zero_grad() { grad.setZero(); }
    // Keeps values on the float32 grid so checkpoints round-trip exactly.
    void snap() {
        value = value.unaryExpr([](double x) { return snap_f32(x); });
    }
};

class Graph;

// Lightweight handle to a tape node.
class Var {
public:
    Var() = default;
    const MatrixXd& value() const;
    int rows() const { return static_cast<int>(value().rows()); }
    int cols() const { return static_cast<int>(value().cols()); }
    bool valid() const { return g_ != nullptr; }

private:
    friend class Graph;
    Var(Graph* g, int id) : g_(g), id_(id) {}
    Graph* g_ = nullptr;
    int id_ = -1;
};

// Reverse-mode tape over dense double matrices. One graph per training step;
// single-threaded and fully deterministic.
class Graph {
public:
    Graph();

    Var constant(MatrixXd v);
    Var param(Param& p);

    Var matmul(Var a, Var b);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var add_rowvec(Var a, Var row);  // broadcast (1 x C) over rows
    Var scale(Var a, double k);
    Var affine(Var a, double k, MatrixXd shift);  // k*a + shift
    Var hadamard(Var a, Var b);

    Var tanh_(Var a);
    Var sigmoid_(Var a);
    Var gelu_(Var a);

    Var slice_cols(Var a, int start, int len);
    Var slice_rows(Var a, int start, int len);
    Var concat_rows(const std::vector<Var>& parts);
    Var gather_rows(Var a, std::shared_ptr<const std::vector<int>> idx);

    Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
    // Multi-head softmax attention over independent groups of group_len
    // consecutive rows.
    Var attention(Var q, Var k, Var v, int heads, int group_len);
    Var dropout(Var x, double rate, Rng& rng);

    Var sum_all(Var a);
    Var mean_all(Var a);
    Var mse_loss(Var pred, MatrixXd target);

    // Batched pUAL objective. y_hat rows are laid out (b, t, j) with j
    // fastest; u is the (T x J) uncertainty grid shared across the batch.
    // value = (1/B) sum_b sum_{t,j} [e^{-u} * ||err||_2 + u].
    Var pual_batch(Var y_hat, Var u, MatrixXd y, int batch, int horizon, int joints);
    // Same layout with u == 0 and no regularizer: mean-over-batch summed L2.
    Var l2_batch(Var y_hat, MatrixXd y, int batch, int horizon, int joints);

    // Student-t (df=1) soft assignment rows: q_ik ∝ (1 + ||z_i - mu_k||^2)^-1.
    Var student_t_assign(Var z, Var mu);
    // (1/N) sum_ik p_ik (log p_ik - log q_ik) with constant target p.
    Var kl_to_target(Var q, MatrixXd p);
    Var cross_entropy(Var logits, std::shared_ptr<const std::vector<int>> labels);

    // Runs reverse accumulation from a 1x1 loss node.
    void backward(Var loss);

    const MatrixXd& value(int id) const { return nodes_[id].value; }
    const MatrixXd& grad(int id) const { return nodes_[id].grad; }
    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        MatrixXd value;
        MatrixXd grad;
        bool needs_grad = false;
        Param* leaf = nullptr;
        std::function<void(Graph&, const MatrixXd&)> backward;  // receives this node's grad
    };

    friend class Var;
    int push(MatrixXd value, bool needs_grad, std::function<void(Graph&, const MatrixXd&)> bw);
    void accumulate(int id, const MatrixXd& g);
    bool needs(Var v) const { return nodes_[v.id_].needs_grad; }
    const MatrixXd& val(Var v) const { return nodes_[v.id_].value; }

    std::vector<Node> nodes_;
};

}  // namespace posecast::ad
