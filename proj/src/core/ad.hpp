#pragma once

#include <Eigen/Core>
#include <deque>
#include <functional>
#include <vector>

#include "error.hpp"
#include "params.hpp"

namespace dmrm::ad {

using dmrm::Matrix;

class Tape;

// One value in the computation graph. Nodes are arena-owned by a Tape and
// referenced by raw pointer; they never outlive their tape.
struct Node {
    Matrix value;
    Matrix grad;
    std::function<void()> backward;
    bool needs_grad = false;

    int rows() const { return static_cast<int>(value.rows()); }
    int cols() const { return static_cast<int>(value.cols()); }
};

using Var = Node*;

// Reverse-mode tape. Ops append nodes in topological order; backward() walks
// the closures in reverse. A tape built with grad_enabled=false records no
// closures and allocates no gradients, which is the evaluation path.
class Tape {
public:
    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool grad_enabled() const { return grad_enabled_; }

    // Leaf holding a constant; no gradient flows into it.
    Var input(Matrix v);

    // Leaf bound to a stored parameter; backward() accumulates into p.grad.
    Var param(Parameter& p);

    // Seeds root (a 1x1 scalar) with gradient 1 and runs all closures in
    // reverse creation order.
    void backward(Var root);

    std::size_t size() const { return nodes_.size(); }

    Node& make(Matrix value, bool needs_grad);

private:
    std::deque<Node> nodes_;
    std::vector<Node*> order_;
    bool grad_enabled_;
};

// ---- primitive ops ----

Var matmul(Tape& t, Var a, Var b);
Var add(Tape& t, Var a, Var b);                 // same shape
Var sub(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double s);
Var add_col_broadcast(Tape& t, Var m, Var v);   // m: (r,c), v: (r,1)
Var hadamard(Tape& t, Var a, Var b);            // same shape
Var hadamard_col_broadcast(Tape& t, Var m, Var v);
Var relu(Tape& t, Var a);
Var tanh(Tape& t, Var a);
Var sigmoid(Tape& t, Var a);
Var transpose(Tape& t, Var a);
Var rows(Tape& t, Var a, int start, int len);
Var col(Tape& t, Var a, int j);
Var concat_rows(Tape& t, const std::vector<Var>& parts);  // equal col counts
Var concat_cols(Tape& t, const std::vector<Var>& parts);  // equal row counts
Var sum_all(Tape& t, Var a);                    // -> 1x1
Var mean_all(Tape& t, Var a);                   // -> 1x1

// Softmax over the rows of a column vector. Masked entries get exactly zero
// weight; logits are max-shifted before exponentiation. Requires at least one
// unmasked entry.
Var softmax_col(Tape& t, Var a, const std::vector<bool>* mask = nullptr);

// Log-softmax over the rows of a column vector (unmasked).
Var log_softmax_col(Tape& t, Var a);

// LayerNorm over the rows of a column vector with learned gain and bias.
Var layer_norm(Tape& t, Var x, Var gain, Var bias, double eps);

// Gather embedding columns: emb is (E, |vocab|), result is (E, ids.size()).
Var embed_cols(Tape& t, Var emb, const std::vector<int>& ids);

}  // namespace dmrm::ad
