#include "posecast/autograd.hpp"

#include <cmath>
#include <numbers>

#include "posecast/error.hpp"

namespace posecast::ad {

const MatrixXd& Var::value() const { return g_->value(id_); }

Graph::Graph() { nodes_.reserve(1024); }

int Graph::push(MatrixXd value, bool needs_grad, std::function<void(Graph&, const MatrixXd&)> bw) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    n.backward = std::move(bw);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

void Graph::accumulate(int id, const MatrixXd& g) {
    Node& n = nodes_[id];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) {
        n.grad = g;
    } else {
        n.grad += g;
    }
}

Var Graph::constant(MatrixXd v) { return Var(this, push(std::move(v), false, nullptr)); }

Var Graph::param(Param& p) {
    const int id = push(p.value, true, nullptr);
    nodes_[id].leaf = &p;
    return Var(this, id);
}

Var Graph::matmul(Var a, Var b) {
    if (a.cols() != b.rows()) throw Error::validation("autograd: matmul shape mismatch");
    const int ia = a.id_, ib = b.id_;
    MatrixXd v = val(a) * val(b);
    const bool ng = needs(a) || needs(b);
    return Var(this, push(std::move(v), ng, [ia, ib](Graph& g, const MatrixXd& go) {
        if (g.nodes_[ia].needs_grad) g.accumulate(ia, go * g.nodes_[ib].value.transpose());
        if (g.nodes_[ib].needs_grad) g.accumulate(ib, g.nodes_[ia].value.transpose() * go);
    }));
}

Var Graph::add(Var a, Var b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error::validation("autograd: add shape mismatch");
    const int ia = a.id_, ib = b.id_;
    return Var(this, push(val(a) + val(b), needs(a) || needs(b), [ia, ib](Graph& g, const MatrixXd& go) {
        g.accumulate(ia, go);
        g.accumulate(ib, go);
    }));
}

Var Graph::sub(Var a, Var b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error::validation("autograd: sub shape mismatch");
    const int ia = a.id_, ib = b.id_;
    return Var(this, push(val(a) - val(b), needs(a) || needs(b), [ia, ib](Graph& g, const MatrixXd& go) {
        g.accumulate(ia, go);
        g.accumulate(ib, -go);
    }));
}

Var Graph::add_rowvec(Var a, Var row) {
    if (row.rows() != 1 || row.cols() != a.cols()) throw Error::validation("autograd: add_rowvec shape mismatch");
    const int ia = a.id_, ir = row.id_;
    MatrixXd v = val(a).rowwise() + val(row).row(0);
    return Var(this, push(std::move(v), needs(a) || needs(row), [ia, ir](Graph& g, const MatrixXd& go) {
        g.accumulate(ia, go);
        if (g.nodes_[ir].needs_grad) g.accumulate(ir, go.colwise().sum());
    }));
}

Var Graph::scale(Var a, double k) {
    const int ia = a.id_;
    return Var(this, push(val(a) * k, needs(a), [ia, k](Graph& g, const MatrixXd& go) {
        g.accumulate(ia, go * k);
    }));
}

Var Graph::affine(Var a, double k, MatrixXd shift) {
    if (shift.rows() != a.rows() || shift.cols() != a.cols()) {
        throw Error::validation("autograd: affine shift shape mismatch");
    }
    const int ia = a.id_;
    return Var(this, push(val(a) * k + shift, needs(a), [ia, k](Graph& g, const MatrixXd& go) {
        g.accumulate(ia, go * k);
    }));
}

Var Graph::hadamard(Var a, Var b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error::validation("autograd: hadamard shape mismatch");
    const int ia = a.id_, ib = b.id_;
    return Var(this, push(val(a).cwiseProduct(val(b)), needs(a) || needs(b),
                          [ia, ib](Graph& g, const MatrixXd& go) {
                              if (g.nodes_[ia].needs_grad)
                                  g.accumulate(ia, go.cwiseProduct(g.nodes_[ib].value));
                              if (g.nodes_[ib].needs_grad)
                                  g.accumulate(ib, go.cwiseProduct(g.nodes_[ia].value));
                          }));
}

Var Graph::tanh_(Var a) {
    const int ia = a.id_;
    const int id = push(val(a).array().tanh().matrix(), needs(a), nullptr);
    nodes_[id].backward = [ia, id](Graph& g, const MatrixXd& go) {
        const MatrixXd& y = g.nodes_[id].value;
        g.accumulate(ia, go.cwiseProduct((1.0 - y.array().square()).matrix()));
    };
    return Var(this, id);
}

Var Graph::sigmoid_(Var a) {
    const int ia = a.id_;
    MatrixXd v = val(a).unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
    const int id = push(std::move(v), needs(a), nullptr);
    nodes_[id].backward = [ia, id](Graph& g, const MatrixXd& go) {
        const MatrixXd& y = g.nodes_[id].value;
        g.accumulate(ia, go.cwiseProduct((y.array() * (1.0 - y.array())).matrix()));
    };
    return Var(this, id);
}

Var Graph::gelu_(Var a) {
    const int ia = a.id_;
    constexpr double inv_sqrt2 = 0.7071067811865475244;
    MatrixXd v = val(a).unaryExpr([](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); });
    return Var(this, push(std::move(v), needs(a), [ia](Graph& g, const MatrixXd& go) {
        const MatrixXd& x = g.nodes_[ia].value;
        const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
        MatrixXd d = x.unaryExpr([inv_sqrt_2pi](double t) {
            return 0.5 * (1.0 + std::erf(t * inv_sqrt2)) + t * inv_sqrt_2pi * std::exp(-0.5 * t * t);
        });
        g.accumulate(ia, go.cwiseProduct(d));
    }));
}

Var Graph::slice_cols(Var a, int start, int len) {
    if (start < 0 || start + len > a.cols()) throw Error::validation("autograd: slice_cols out of range");
    const int ia = a.id_, r = a.rows(), c = a.cols();
    return Var(this, push(val(a).middleCols(start, len), needs(a),
                          [ia, start, len, r, c](Graph& g, const MatrixXd& go) {
                              MatrixXd full = MatrixXd::Zero(r, c);
                              full.middleCols(start, len) = go;
                              g.accumulate(ia, full);
                          }));
}

Var Graph::slice_rows(Var a, int start, int len) {
    if (start < 0 || start + len > a.rows()) throw Error::validation("autograd: slice_rows out of range");
    const int ia = a.id_, r = a.rows(), c = a.cols();
    return Var(this, push(val(a).middleRows(start, len), needs(a),
                          [ia, start, len, r, c](Graph& g, const MatrixXd& go) {
                              MatrixXd full = MatrixXd::Zero(r, c);
                              full.middleRows(start, len) = go;
                              g.accumulate(ia, full);
                          }));
}

Var Graph::concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw Error::validation("autograd: concat_rows needs inputs");
    int rows = 0;
    const int cols = parts[0].cols();
    bool ng = false;
    std::vector<int> ids, offsets, lens;
    for (const Var& p : parts) {
        if (p.cols() != cols) throw Error::validation("autograd: concat_rows column mismatch");
        ids.push_back(p.id_);
        offsets.push_back(rows);
        lens.push_back(p.rows());
        rows += p.rows();
        ng = ng || needs(p);
    }
    MatrixXd v(rows, cols);
    for (std::size_t i = 0; i < ids.size(); ++i) v.middleRows(offsets[i], lens[i]) = nodes_[ids[i]].value;
    return Var(this, push(std::move(v), ng, [ids, offsets, lens](Graph& g, const MatrixXd& go) {
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (g.nodes_[ids[i]].needs_grad) g.accumulate(ids[i], go.middleRows(offsets[i], lens[i]));
        }
    }));
}

Var Graph::gather_rows(Var a, std::shared_ptr<const std::vector<int>> idx) {
    const int ia = a.id_, r = a.rows(), c = a.cols();
    MatrixXd v(static_cast<int>(idx->size()), c);
    for (std::size_t i = 0; i < idx->size(); ++i) {
        const int src = (*idx)[i];
        if (src < 0 || src >= r) throw Error::validation("autograd: gather_rows index out of range");
        v.row(static_cast<int>(i)) = val(a).row(src);
    }
    return Var(this, push(std::move(v), needs(a), [ia, idx, r, c](Graph& g, const MatrixXd& go) {
        MatrixXd full = MatrixXd::Zero(r, c);
        for (std::size_t i = 0; i < idx->size(); ++i) full.row((*idx)[i]) += go.row(static_cast<int>(i));
        g.accumulate(ia, full);
    }));
}

Var Graph::layer_norm(Var x, Var gamma, Var beta, double eps) {
    if (gamma.rows() != 1 || gamma.cols() != x.cols() || beta.rows() != 1 || beta.cols() != x.cols()) {
        throw Error::validation("autograd: layer_norm parameter shape mismatch");
    }
    const int ix = x.id_, ig = gamma.id_, ib = beta.id_;
    const int rows = x.rows(), cols = x.cols();
    auto xhat = std::make_shared<MatrixXd>(rows, cols);
    auto inv_std = std::make_shared<VectorXd>(rows);
    MatrixXd out(rows, cols);
    for (int r = 0; r < rows; ++r) {
        const double mu = val(x).row(r).mean();
        const double var = (val(x).row(r).array() - mu).square().mean();
        const double is = 1.0 / std::sqrt(var + eps);
        (*inv_std)[r] = is;
        xhat->row(r) = (val(x).row(r).array() - mu) * is;
        out.row(r) = xhat->row(r).cwiseProduct(val(gamma).row(0)) + val(beta).row(0);
    }
    const bool ng = needs(x) || needs(gamma) || needs(beta);
    return Var(this, push(std::move(out), ng, [ix, ig, ib, xhat, inv_std, cols](Graph& g, const MatrixXd& go) {
        const MatrixXd& gamma_v = g.nodes_[ig].value;
        if (g.nodes_[ig].needs_grad) g.accumulate(ig, (go.cwiseProduct(*xhat)).colwise().sum());
        if (g.nodes_[ib].needs_grad) g.accumulate(ib, go.colwise().sum());
        if (g.nodes_[ix].needs_grad) {
            MatrixXd dx(go.rows(), cols);
            const double n = static_cast<double>(cols);
            for (int r = 0; r < go.rows(); ++r) {
                const Eigen::RowVectorXd dxhat = go.row(r).cwiseProduct(gamma_v.row(0));
                const double s1 = dxhat.sum();
                const double s2 = dxhat.cwiseProduct(xhat->row(r)).sum();
                dx.row(r) = ((*inv_std)[r] / n) * (n * dxhat.array() - s1 - xhat->row(r).array() * s2);
            }
            g.accumulate(ix, dx);
        }
    }));
}

Var Graph::attention(Var q, Var k, Var v, int heads, int group_len) {
    const int rows = q.rows(), width = q.cols();
    if (k.rows() != rows || v.rows() != rows || k.cols() != width || v.cols() != width) {
        throw Error::validation("autograd: attention input shape mismatch");
    }
    if (rows % group_len != 0) throw Error::validation("autograd: attention rows not divisible by group_len");
    if (width % heads != 0) throw Error::validation("autograd: attention width not divisible by heads");
    const int groups = rows / group_len;
    const int hd = width / heads;
    const double scl = 1.0 / std::sqrt(static_cast<double>(hd));
    const int iq = q.id_, ik = k.id_, iv = v.id_;

    auto attn = std::make_shared<std::vector<MatrixXd>>();
    attn->reserve(static_cast<std::size_t>(groups) * heads);
    MatrixXd out(rows, width);
    for (int g = 0; g < groups; ++g) {
        const int r0 = g * group_len;
        for (int h = 0; h < heads; ++h) {
            const int c0 = h * hd;
            const auto Qb = val(q).block(r0, c0, group_len, hd);
            const auto Kb = val(k).block(r0, c0, group_len, hd);
            const auto Vb = val(v).block(r0, c0, group_len, hd);
            MatrixXd s = (Qb * Kb.transpose()) * scl;
            for (int r = 0; r < group_len; ++r) {
                const double mx = s.row(r).maxCoeff();
                s.row(r) = (s.row(r).array() - mx).exp();
                s.row(r) /= s.row(r).sum();
            }
            out.block(r0, c0, group_len, hd) = s * Vb;
            attn->push_back(std::move(s));
        }
    }
    const bool ng = needs(q) || needs(k) || needs(v);
    return Var(this, push(std::move(out), ng,
                          [iq, ik, iv, attn, groups, heads, group_len, hd, scl, rows, width](
                              Graph& g, const MatrixXd& go) {
                              MatrixXd dq = MatrixXd::Zero(rows, width);
                              MatrixXd dk = MatrixXd::Zero(rows, width);
                              MatrixXd dv = MatrixXd::Zero(rows, width);
                              const MatrixXd& qv = g.nodes_[iq].value;
                              const MatrixXd& kv = g.nodes_[ik].value;
                              const MatrixXd& vv = g.nodes_[iv].value;
                              for (int gr = 0; gr < groups; ++gr) {
                                  const int r0 = gr * group_len;
                                  for (int h = 0; h < heads; ++h) {
                                      const int c0 = h * hd;
                                      const MatrixXd& A = (*attn)[static_cast<std::size_t>(gr) * heads + h];
                                      const auto Qb = qv.block(r0, c0, group_len, hd);
                                      const auto Kb = kv.block(r0, c0, group_len, hd);
                                      const auto Vb = vv.block(r0, c0, group_len, hd);
                                      const auto dOut = go.block(r0, c0, group_len, hd);
                                      dv.block(r0, c0, group_len, hd) += A.transpose() * dOut;
                                      MatrixXd dA = dOut * Vb.transpose();
                                      MatrixXd dS(group_len, group_len);
                                      for (int r = 0; r < group_len; ++r) {
                                          const double dot = dA.row(r).cwiseProduct(A.row(r)).sum();
                                          dS.row(r) = A.row(r).array() * (dA.row(r).array() - dot);
                                      }
                                      dq.block(r0, c0, group_len, hd) += (dS * Kb) * scl;
                                      dk.block(r0, c0, group_len, hd) += (dS.transpose() * Qb) * scl;
                                  }
                              }
                              if (g.nodes_[iq].needs_grad) g.accumulate(iq, dq);
                              if (g.nodes_[ik].needs_grad) g.accumulate(ik, dk);
                              if (g.nodes_[iv].needs_grad) g.accumulate(iv, dv);
                          }));
}

Var Graph::dropout(Var x, double rate, Rng& rng) {
    if (rate <= 0.0) return x;
    if (rate >= 1.0) throw Error::validation("autograd: dropout rate must be < 1");
    const int ia = x.id_;
    auto mask = std::make_shared<MatrixXd>(x.rows(), x.cols());
    const double keep = 1.0 - rate;
    for (int r = 0; r < x.rows(); ++r) {
        for (int c = 0; c < x.cols(); ++c) (*mask)(r, c) = rng.uniform() < rate ? 0.0 : 1.0 / keep;
    }
    return Var(this, push(val(x).cwiseProduct(*mask), needs(x), [ia, mask](Graph& g, const MatrixXd& go) {
        g.accumulate(ia, go.cwiseProduct(*mask));
    }));
}

Var Graph::sum_all(Var a) {
    const int ia = a.id_, r = a.rows(), c = a.cols();
    MatrixXd v(1, 1);
    v(0, 0) = val(a).sum();
    return Var(this, push(std::move(v), needs(a), [ia, r, c](Graph& g, const MatrixXd& go) {
        g.accumulate(ia, MatrixXd::Constant(r, c, go(0, 0)));
    }));
}

Var Graph::mean_all(Var a) { return scale(sum_all(a), 1.0 / (static_cast<double>(a.rows()) * a.cols())); }

Var Graph::mse_loss(Var pred, MatrixXd target) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
        throw Error::validation("autograd: mse target shape mismatch");
    }
    const int ia = pred.id_;
    auto tgt = std::make_shared<MatrixXd>(std::move(target));
    const double n = static_cast<double>(pred.rows()) * pred.cols();
    MatrixXd v(1, 1);
    v(0, 0) = (val(pred) - *tgt).squaredNorm() / n;
    return Var(this, push(std::move(v), needs(pred), [ia, tgt, n](Graph& g, const MatrixXd& go) {
        g.accumulate(ia, (2.0 / n) * go(0, 0) * (g.nodes_[ia].value - *tgt));
    }));
}

Var Graph::pual_batch(Var y_hat, Var u, MatrixXd y, int batch, int horizon, int joints) {
    const int rows = batch * horizon * joints;
    if (y_hat.rows() != rows || y_hat.cols() != 3) throw Error::validation("autograd: pual_batch y_hat shape");
    if (y.rows() != rows || y.cols() != 3) throw Error::validation("autograd: pual_batch y shape");
    if (u.rows() != horizon || u.cols() != joints) throw Error::validation("autograd: pual_batch u shape");
    const int iy = y_hat.id_, iu = u.id_;
    auto target = std::make_shared<MatrixXd>(std::move(y));
    double total = 0.0;
    const MatrixXd& uval = val(u);
    for (int b = 0; b < batch; ++b) {
        for (int t = 0; t < horizon; ++t) {
            for (int j = 0; j < joints; ++j) {
                const int r = (b * horizon + t) * joints + j;
                const double err = (val(y_hat).row(r) - target->row(r)).norm();
                total += std::exp(-uval(t, j)) * err + uval(t, j);
            }
        }
    }
    MatrixXd v(1, 1);
    v(0, 0) = total / batch;
    return Var(this, push(std::move(v), needs(y_hat) || needs(u),
                          [iy, iu, target, batch, horizon, joints](Graph& g, const MatrixXd& go) {
                              const double w = go(0, 0) / batch;
                              const MatrixXd& uval = g.nodes_[iu].value;
                              const MatrixXd& yh = g.nodes_[iy].value;
                              MatrixXd dy = MatrixXd::Zero(yh.rows(), 3);
                              MatrixXd du = MatrixXd::Constant(uval.rows(), uval.cols(),
                                                               static_cast<double>(batch));
                              for (int b = 0; b < batch; ++b) {
                                  for (int t = 0; t < horizon; ++t) {
                                      for (int j = 0; j < joints; ++j) {
                                          const int r = (b * horizon + t) * joints + j;
                                          const Eigen::RowVector3d diff = yh.row(r) - target->row(r);
                                          const double err = diff.norm();
                                          const double eu = std::exp(-uval(t, j));
                                          if (err > 0.0) dy.row(r) = eu * diff / err;
                                          du(t, j) -= eu * err;
                                      }
                                  }
                              }
                              if (g.nodes_[iy].needs_grad) g.accumulate(iy, w * dy);
                              if (g.nodes_[iu].needs_grad) g.accumulate(iu, w * du);
                          }));
}

Var Graph::l2_batch(Var y_hat, MatrixXd y, int batch, int horizon, int joints) {
    const int rows = batch * horizon * joints;
    if (y_hat.rows() != rows || y_hat.cols() != 3) throw Error::validation("autograd: l2_batch y_hat shape");
    if (y.rows() != rows || y.cols() != 3) throw Error::validation("autograd: l2_batch y shape");
    const int iy = y_hat.id_;
    auto target = std::make_shared<MatrixXd>(std::move(y));
    double total = 0.0;
    for (int r = 0; r < rows; ++r) total += (val(y_hat).row(r) - target->row(r)).norm();
    MatrixXd v(1, 1);
    v(0, 0) = total / batch;
    return Var(this, push(std::move(v), needs(y_hat), [iy, target, batch](Graph& g, const MatrixXd& go) {
        const double w = go(0, 0) / batch;
        const MatrixXd& yh = g.nodes_[iy].value;
        MatrixXd dy = MatrixXd::Zero(yh.rows(), 3);
        for (int r = 0; r < yh.rows(); ++r) {
            const Eigen::RowVector3d diff = yh.row(r) - target->row(r);
            const double err = diff.norm();
            if (err > 0.0) dy.row(r) = diff / err;
        }
        g.accumulate(iy, w * dy);
    }));
}

Var Graph::student_t_assign(Var z, Var mu) {
    if (z.cols() != mu.cols()) throw Error::validation("autograd: student_t_assign dim mismatch");
    const int n = z.rows(), k = mu.rows();
    const int iz = z.id_, im = mu.id_;
    auto w = std::make_shared<MatrixXd>(n, k);
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < k; ++c) {
            (*w)(i, c) = 1.0 / (1.0 + (val(z).row(i) - val(mu).row(c)).squaredNorm());
        }
    }
    auto srow = std::make_shared<VectorXd>(w->rowwise().sum());
    MatrixXd q = w->array().colwise() / srow->array();
    return Var(this, push(std::move(q), needs(z) || needs(mu),
                          [iz, im, w, srow, n, k](Graph& g, const MatrixXd& go) {
                              const MatrixXd& zv = g.nodes_[iz].value;
                              const MatrixXd& mv = g.nodes_[im].value;
                              MatrixXd dz = MatrixXd::Zero(zv.rows(), zv.cols());
                              MatrixXd dm = MatrixXd::Zero(mv.rows(), mv.cols());
                              for (int i = 0; i < n; ++i) {
                                  const double s = (*srow)[i];
                                  const double dot = go.row(i).cwiseProduct(w->row(i)).sum() / (s * s);
                                  for (int c = 0; c < k; ++c) {
                                      const double dw = go(i, c) / s - dot;
                                      const double wic = (*w)(i, c);
                                      const Eigen::RowVectorXd diff = zv.row(i) - mv.row(c);
                                      const Eigen::RowVectorXd contrib = dw * (-2.0 * wic * wic) * diff;
                                      dz.row(i) += contrib;
                                      dm.row(c) -= contrib;
                                  }
                              }
                              if (g.nodes_[iz].needs_grad) g.accumulate(iz, dz);
                              if (g.nodes_[im].needs_grad) g.accumulate(im, dm);
                          }));
}

Var Graph::kl_to_target(Var q, MatrixXd p) {
    if (q.rows() != p.rows() || q.cols() != p.cols()) throw Error::validation("autograd: kl target shape");
    const int iq = q.id_;
    auto target = std::make_shared<MatrixXd>(std::move(p));
    const double n = static_cast<double>(q.rows());
    double loss = 0.0;
    for (int i = 0; i < q.rows(); ++i) {
        for (int c = 0; c < q.cols(); ++c) {
            const double pv = (*target)(i, c);
            if (pv > 0.0) loss += pv * (std::log(pv) - std::log(val(q)(i, c)));
        }
    }
    MatrixXd v(1, 1);
    v(0, 0) = loss / n;
    return Var(this, push(std::move(v), needs(q), [iq, target, n](Graph& g, const MatrixXd& go) {
        const MatrixXd& qv = g.nodes_[iq].value;
        g.accumulate(iq, -(go(0, 0) / n) * target->cwiseQuotient(qv));
    }));
}

Var Graph::cross_entropy(Var logits, std::shared_ptr<const std::vector<int>> labels) {
    if (static_cast<int>(labels->size()) != logits.rows()) {
        throw Error::validation("autograd: cross_entropy label count mismatch");
    }
    const int il = logits.id_;
    const int n = logits.rows();
    auto probs = std::make_shared<MatrixXd>(logits.rows(), logits.cols());
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        const double mx = val(logits).row(i).maxCoeff();
        Eigen::RowVectorXd e = (val(logits).row(i).array() - mx).exp();
        e /= e.sum();
        probs->row(i) = e;
        loss -= std::log(std::max(e[(*labels)[i]], 1e-300));
    }
    MatrixXd v(1, 1);
    v(0, 0) = loss / n;
    return Var(this, push(std::move(v), needs(logits), [il, probs, labels, n](Graph& g, const MatrixXd& go) {
        MatrixXd d = *probs;
        for (int i = 0; i < n; ++i) d(i, (*labels)[i]) -= 1.0;
        g.accumulate(il, (go(0, 0) / n) * d);
    }));
}

void Graph::backward(Var loss) {
    if (loss.rows() != 1 || loss.cols() != 1) throw Error::validation("autograd: backward needs a 1x1 loss");
    nodes_[loss.id_].grad = MatrixXd::Ones(1, 1);
    for (int i = loss.id_; i >= 0; --i) {
        Node& n = nodes_[i];
        if (!n.needs_grad || n.grad.size() == 0) continue;
        if (n.leaf != nullptr) {
            n.leaf->grad += n.grad;
        } else if (n.backward) {
            n.backward(*this, n.grad);
        }
    }
}

}  // namespace posecast::ad
