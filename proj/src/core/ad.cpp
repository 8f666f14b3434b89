#include "ad.hpp"

#include <cmath>

namespace dmrm::ad {

Node& Tape::make(Matrix value, bool needs_grad) {
    nodes_.emplace_back();
    Node& n = nodes_.back();
    n.value = std::move(value);
    n.needs_grad = grad_enabled_ && needs_grad;
    if (n.needs_grad) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    order_.push_back(&n);
    return n;
}

Var Tape::input(Matrix v) { return &make(std::move(v), false); }

Var Tape::param(Parameter& p) {
    Node& n = make(p.value, true);
    if (n.needs_grad) {
        Node* np = &n;
        Parameter* pp = &p;
        n.backward = [np, pp] { pp->grad += np->grad; };
    }
    return &n;
}

void Tape::backward(Var root) {
    require(root->rows() == 1 && root->cols() == 1, "backward root must be scalar");
    require(grad_enabled_, "backward on a gradient-disabled tape");
    require(root->needs_grad, "backward root does not depend on any parameter");
    root->grad(0, 0) = 1.0;
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
        if ((*it)->backward) (*it)->backward();
    }
}

namespace {

bool wants(Var a) { return a->needs_grad; }

Node& out_node(Tape& t, Matrix value, std::initializer_list<Var> parents) {
    bool ng = false;
    for (Var p : parents) ng = ng || p->needs_grad;
    return t.make(std::move(value), ng);
}

}  // namespace

Var matmul(Tape& t, Var a, Var b) {
    require(a->cols() == b->rows(), "matmul shape mismatch");
    Node& n = out_node(t, a->value * b->value, {a, b});
    if (n.needs_grad) {
        Node* np = &n;
        n.backward = [np, a, b] {
            if (a->needs_grad) a->grad.noalias() += np->grad * b->value.transpose();
            if (b->needs_grad) b->grad.noalias() += a->value.transpose() * np->grad;
        };
    }
    return &n;
}

Var add(Tape& t, Var a, Var b) {
    require(a->rows() == b->rows() && a->cols() == b->cols(), "add shape mismatch");
    Node& n = out_node(t, a->value + b->value, {a, b});
    if (n.needs_grad) {
        Node* np = &n;
        n.backward = [np, a, b] {
            if (a->needs_grad) a->grad += np->grad;
            if (b->needs_grad) b->grad += np->grad;
        };
    }
    return &n;
}

Var sub(Tape& t, Var a, Var b) {
    require(a->rows() == b->rows() && a->cols() == b->cols(), "sub shape mismatch");
    Node& n = out_node(t, a->value - b->value, {a, b});
    if (n.needs_grad) {
        Node* np = &n;
        n.backward = [np, a, b] {
            if (a->needs_grad) a->grad += np->grad;
            if (b->needs_grad) b->grad -= np->grad;
        };
    }
    return &n;
}

Var scale(Tape& t, Var a, double s) {
    Node& n = out_node(t, a->value * s, {a});
    if (n.needs_grad) {
        Node* np = &n;
        n.backward = [np, a, s] {
            if (a->needs_grad) a->grad += np->grad * s;
        };
    }
    return &n;
}

Var add_col_broadcast(Tape& t, Var m, Var v) {
    require(v->cols() == 1 && v->rows() == m->rows(), "add_col_broadcast shape mismatch");
    Node& n = out_node(t, m->value.colwise() + Eigen::VectorXd(v->value.col(0)), {m, v});
    if (n.needs_grad) {
        Node* np = &n;
        n.backward = [np, m, v] {
            if (m->needs_grad) m->grad += np->grad;
            if (v->needs_grad) v->grad += np->grad.rowwise().sum();
        };
    }
    return &n;
}

Var hadamard(Tape& t, Var a, Var b) {
    require(a->rows() == b->rows() && a->cols() == b->cols(), "hadamard shape mismatch");
    Node& n = out_node(t, a->value.cwiseProduct(b->value), {a, b});
    if (n.needs_grad) {
        Node* np = &n;
        n.backward = [np, a, b] {
            if (a->needs_grad) a->grad += np->grad.cwiseProduct(b->value);
            if (b->needs_grad) b->grad += np->grad.cwiseProduct(a->value);
        };
    }
    return &n;
}

Var hadamard_col_broadcast(Tape& t, Var m, Var v) {
    require(v->cols() == 1 && v->rows() == m->rows(), "hadamard_col_broadcast shape mismatch");
    Matrix out = m->value.array().colwise() * v->value.col(0).array();
    Node& n = out_node(t, std::move(out), {m, v});
    if (n.needs_grad) {
        Node* np = &n;
        n.backward = [np, m, v] {
            if (m->needs_grad)
                m->grad.array() += np->grad.array().colwise() * v->value.col(0).array();
            if (v->needs_grad)
                v->grad += np->grad.cwiseProduct(m->value).rowwise().sum();
        };
    }
    return &n;
}

Var relu(Tape& t, Var a) {
    Node& n = out_node(t, a->value.cwiseMax(0.0), {a});
    if (n.needs_grad) {
        Node* np = &n;
        n.backward = [np, a] {
            if (!a->needs_grad) return;
            a->grad.array() += np->grad.array() * (a->value.array() > 0.0).cast<double>();
        };
    }
    return &n;
}

Var tanh(Tape& t, Var a) {
    Node& n = out_node(t, a->value.array().tanh().matrix(), {a});
    if (n.needs_grad) {
        Node* np = &n;
        n.backward = [np, a] {
            if (!a->needs_grad) return;
            a->grad.array() += np->grad.array() * (1.0 - np->value.array().square());
        };
    }
    return &n;
}

Var sigmoid(Tape& t, Var a) {
    Matrix out = (1.0 / (1.0 + (-a->value.array()).exp())).matrix();
    Node& n = out_node(t, std::move(out), {a});
    if (n.needs_grad) {
        Node* np = &n;
        n.backward = [np, a] {
            if (!a->needs_grad) return;
            a->grad.array() += np->grad.array() * np->value.array() * (1.0 - np->value.array());
        };
    }
    return &n;
}

Var transpose(Tape& t, Var a) {
    Node& n = out_node(t, a->value.transpose(), {a});
    if (n.needs_grad) {
        Node* np = &n;
        n.backward = [np, a] {
            if (a->needs_grad) a->grad += np->grad.transpose();
        };
    }
    return &n;
}

Var rows(Tape& t, Var a, int start, int len) {
    require(start >= 0 && len >= 1 && start + len <= a->rows(), "rows slice out of range");
    Node& n = out_node(t, a->value.middleRows(start, len), {a});
    if (n.needs_grad) {
        Node* np = &n;
        n.backward = [np, a, start, len] {
            if (a->needs_grad) a->grad.middleRows(start, len) += np->grad;
        };
    }
    return &n;
}

Var col(Tape& t, Var a, int j) {
    require(j >= 0 && j < a->cols(), "column index out of range");
    Node& n = out_node(t, a->value.col(j), {a});
    if (n.needs_grad) {
        Node* np = &n;
        n.backward = [np, a, j] {
            if (a->needs_grad) a->grad.col(j) += np->grad;
        };
    }
    return &n;
}

Var concat_rows(Tape& t, const std::vector<Var>& parts) {
    require(!parts.empty(), "concat_rows: empty input");
    int total = 0;
    const int cols = parts[0]->cols();
    bool ng = false;
    for (Var p : parts) {
        require(p->cols() == cols, "concat_rows column mismatch");
        total += p->rows();
        ng = ng || p->needs_grad;
    }
    Matrix out(total, cols);
    int at = 0;
    for (Var p : parts) {
        out.middleRows(at, p->rows()) = p->value;
        at += p->rows();
    }
    Node& n = t.make(std::move(out), ng);
    if (n.needs_grad) {
        Node* np = &n;
        std::vector<Var> ps = parts;
        n.backward = [np, ps] {
            int r = 0;
            for (Var p : ps) {
                if (p->needs_grad) p->grad += np->grad.middleRows(r, p->rows());
                r += p->rows();
            }
        };
    }
    return &n;
}

Var concat_cols(Tape& t, const std::vector<Var>& parts) {
    require(!parts.empty(), "concat_cols: empty input");
    int total = 0;
    const int rows_n = parts[0]->rows();
    bool ng = false;
    for (Var p : parts) {
        require(p->rows() == rows_n, "concat_cols row mismatch");
        total += p->cols();
        ng = ng || p->needs_grad;
    }
    Matrix out(rows_n, total);
    int at = 0;
    for (Var p : parts) {
        out.middleCols(at, p->cols()) = p->value;
        at += p->cols();
    }
    Node& n = t.make(std::move(out), ng);
    if (n.needs_grad) {
        Node* np = &n;
        std::vector<Var> ps = parts;
        n.backward = [np, ps] {
            int c = 0;
            for (Var p : ps) {
                if (p->needs_grad) p->grad += np->grad.middleCols(c, p->cols());
                c += p->cols();
            }
        };
    }
    return &n;
}

Var sum_all(Tape& t, Var a) {
    Matrix out(1, 1);
    out(0, 0) = a->value.sum();
    Node& n = out_node(t, std::move(out), {a});
    if (n.needs_grad) {
        Node* np = &n;
        n.backward = [np, a] {
            if (a->needs_grad) a->grad.array() += np->grad(0, 0);
        };
    }
    return &n;
}

Var mean_all(Tape& t, Var a) {
    const double inv = 1.0 / static_cast<double>(a->rows() * a->cols());
    return scale(t, sum_all(t, a), inv);
}

Var softmax_col(Tape& t, Var a, const std::vector<bool>* mask) {
    require(a->cols() == 1, "softmax_col expects a column vector");
    const int n_rows = a->rows();
    if (mask) require(static_cast<int>(mask->size()) == n_rows, "softmax mask size mismatch");

    double mx = -std::numeric_limits<double>::infinity();
    int live = 0;
    for (int i = 0; i < n_rows; ++i) {
        if (mask && !(*mask)[i]) continue;
        ++live;
        mx = std::max(mx, a->value(i, 0));
    }
    require(live > 0, "softmax: all positions masked");
    require(std::isfinite(mx), "softmax: non-finite logits");

    Matrix y = Matrix::Zero(n_rows, 1);
    double z = 0.0;
    for (int i = 0; i < n_rows; ++i) {
        if (mask && !(*mask)[i]) continue;
        y(i, 0) = std::exp(a->value(i, 0) - mx);
        z += y(i, 0);
    }
    y /= z;

    Node& n = out_node(t, std::move(y), {a});
    if (n.needs_grad) {
        Node* np = &n;
        n.backward = [np, a] {
            if (!a->needs_grad) return;
            // masked rows have y=0, so they contribute nothing here
            const double dot = (np->grad.array() * np->value.array()).sum();
            a->grad.array() += np->value.array() * (np->grad.array() - dot);
        };
    }
    return &n;
}

Var log_softmax_col(Tape& t, Var a) {
    require(a->cols() == 1, "log_softmax_col expects a column vector");
    const double mx = a->value.maxCoeff();
    require(std::isfinite(mx), "log_softmax: non-finite logits");
    const Eigen::ArrayXd shifted = a->value.col(0).array() - mx;
    const double lse = std::log(shifted.exp().sum());
    Matrix out = (shifted - lse).matrix();
    Node& n = out_node(t, std::move(out), {a});
    if (n.needs_grad) {
        Node* np = &n;
        n.backward = [np, a] {
            if (!a->needs_grad) return;
            const double gsum = np->grad.sum();
            a->grad.array() += np->grad.array() - np->value.array().exp() * gsum;
        };
    }
    return &n;
}

Var layer_norm(Tape& t, Var x, Var gain, Var bias, double eps) {
    require(x->cols() == 1 && gain->cols() == 1 && bias->cols() == 1, "layer_norm expects column vectors");
    require(x->rows() == gain->rows() && x->rows() == bias->rows(), "layer_norm shape mismatch");
    const int n_rows = x->rows();
    const double mu = x->value.mean();
    const Eigen::ArrayXd d = x->value.col(0).array() - mu;
    const double var = d.square().mean();
    const double inv = 1.0 / std::sqrt(var + eps);
    const Eigen::ArrayXd xhat = d * inv;
    Matrix out = (gain->value.col(0).array() * xhat + bias->value.col(0).array()).matrix();
    Node& n = out_node(t, std::move(out), {x, gain, bias});
    if (n.needs_grad) {
        Node* np = &n;
        Eigen::ArrayXd xhat_c = xhat;
        n.backward = [np, x, gain, bias, xhat_c, inv, n_rows] {
            const Eigen::ArrayXd gy = np->grad.col(0).array();
            if (bias->needs_grad) bias->grad.col(0).array() += gy;
            if (gain->needs_grad) gain->grad.col(0).array() += gy * xhat_c;
            if (x->needs_grad) {
                const Eigen::ArrayXd gxhat = gy * gain->value.col(0).array();
                const double m1 = gxhat.mean();
                const double m2 = (gxhat * xhat_c).mean();
                x->grad.col(0).array() += inv * (gxhat - m1 - xhat_c * m2);
            }
            (void)n_rows;
        };
    }
    return &n;
}

Var embed_cols(Tape& t, Var emb, const std::vector<int>& ids) {
    require(!ids.empty(), "embed_cols: empty id list");
    const int vocab = emb->cols();
    Matrix out(emb->rows(), static_cast<int>(ids.size()));
    for (std::size_t j = 0; j < ids.size(); ++j) {
        require(ids[j] >= 0 && ids[j] < vocab, "token id out of range");
        out.col(static_cast<int>(j)) = emb->value.col(ids[j]);
    }
    Node& n = out_node(t, std::move(out), {emb});
    if (n.needs_grad) {
        Node* np = &n;
        std::vector<int> ids_c = ids;
        n.backward = [np, emb, ids_c] {
            if (!emb->needs_grad) return;
            for (std::size_t j = 0; j < ids_c.size(); ++j)
                emb->grad.col(ids_c[j]) += np->grad.col(static_cast<int>(j));
        };
    }
    return &n;
}

}  // namespace dmrm::ad
