#pragma once

#include <string>

#include "ad.hpp"
#include "params.hpp"
#include "rng.hpp"

namespace dmrm::nn {

using ad::Tape;
using ad::Var;

// Two-layer perceptron with ReLU between the layers; linear output.
struct Mlp2 {
    Parameter* w1 = nullptr;
    Parameter* b1 = nullptr;
    Parameter* w2 = nullptr;
    Parameter* b2 = nullptr;

    static Mlp2 create(ParameterStore& ps, const std::string& prefix, int in, int hidden, int out,
                       Rng& rng) {
        Mlp2 m;
        m.w1 = &ps.create_uniform(prefix + ".w1", hidden, in, in, rng);
        m.b1 = &ps.create_uniform(prefix + ".b1", hidden, 1, in, rng);
        m.w2 = &ps.create_uniform(prefix + ".w2", out, hidden, hidden, rng);
        m.b2 = &ps.create_uniform(prefix + ".b2", out, 1, hidden, rng);
        return m;
    }

    // hidden width defaults to the output width
    static Mlp2 create(ParameterStore& ps, const std::string& prefix, int in, int out, Rng& rng) {
        return create(ps, prefix, in, out, out, rng);
    }

    static Mlp2 lookup(ParameterStore& ps, const std::string& prefix) {
        return Mlp2{&ps.get(prefix + ".w1"), &ps.get(prefix + ".b1"),
                    &ps.get(prefix + ".w2"), &ps.get(prefix + ".b2")};
    }

    int in_width() const { return static_cast<int>(w1->value.cols()); }
    int out_width() const { return static_cast<int>(w2->value.rows()); }

    // x may be a single column or a matrix of columns; biases broadcast.
    Var apply(Tape& t, Var x) const {
        Var h = ad::add_col_broadcast(t, ad::matmul(t, t.param(*w1), x), t.param(*b1));
        h = ad::relu(t, h);
        return ad::add_col_broadcast(t, ad::matmul(t, t.param(*w2), h), t.param(*b2));
    }
};

// Single affine map with bias, broadcast over columns.
struct Affine {
    Parameter* w = nullptr;
    Parameter* b = nullptr;

    static Affine create(ParameterStore& ps, const std::string& prefix, int in, int out, Rng& rng) {
        Affine a;
        a.w = &ps.create_uniform(prefix + ".w", out, in, in, rng);
        a.b = &ps.create_uniform(prefix + ".b", out, 1, in, rng);
        return a;
    }

    static Affine lookup(ParameterStore& ps, const std::string& prefix) {
        return Affine{&ps.get(prefix + ".w"), &ps.get(prefix + ".b")};
    }

    Var apply(Tape& t, Var x) const {
        return ad::add_col_broadcast(t, ad::matmul(t, t.param(*w), x), t.param(*b));
    }
};

// LSTM cell. Gate order in the stacked weight matrices is
// (input, forget, cell, output); checkpoints rely on this layout.
struct LstmCell {
    Parameter* w_x = nullptr;  // (4H, in)
    Parameter* w_h = nullptr;  // (4H, H)
    Parameter* b = nullptr;    // (4H, 1)
    int hidden = 0;

    static LstmCell create(ParameterStore& ps, const std::string& prefix, int in, int hidden, Rng& rng) {
        LstmCell c;
        c.hidden = hidden;
        c.w_x = &ps.create_uniform(prefix + ".w_x", 4 * hidden, in, in, rng);
        c.w_h = &ps.create_uniform(prefix + ".w_h", 4 * hidden, hidden, hidden, rng);
        c.b = &ps.create_uniform(prefix + ".b", 4 * hidden, 1, hidden, rng);
        return c;
    }

    static LstmCell lookup(ParameterStore& ps, const std::string& prefix) {
        LstmCell c;
        c.w_x = &ps.get(prefix + ".w_x");
        c.w_h = &ps.get(prefix + ".w_h");
        c.b = &ps.get(prefix + ".b");
        c.hidden = static_cast<int>(c.w_h->value.cols());
        return c;
    }

    struct State {
        Var h = nullptr;
        Var c = nullptr;
    };

    State step(Tape& t, Var x, const State& prev) const {
        Var gates = ad::add(t, ad::matmul(t, t.param(*w_x), x),
                            ad::add_col_broadcast(t, ad::matmul(t, t.param(*w_h), prev.h), t.param(*b)));
        Var i = ad::sigmoid(t, ad::rows(t, gates, 0, hidden));
        Var f = ad::sigmoid(t, ad::rows(t, gates, hidden, hidden));
        Var g = ad::tanh(t, ad::rows(t, gates, 2 * hidden, hidden));
        Var o = ad::sigmoid(t, ad::rows(t, gates, 3 * hidden, hidden));
        State next;
        next.c = ad::add(t, ad::hadamard(t, f, prev.c), ad::hadamard(t, i, g));
        next.h = ad::hadamard(t, o, ad::tanh(t, next.c));
        return next;
    }

    State zero_state(Tape& t) const {
        State s;
        s.h = t.input(Matrix::Zero(hidden, 1));
        s.c = t.input(Matrix::Zero(hidden, 1));
        return s;
    }
};

}  // namespace dmrm::nn
