#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>

#include "core/ad.hpp"
#include "core/error.hpp"
#include "oracles.hpp"

using dmrm::Error;
using dmrm::Matrix;
using dmrm::Parameter;
using dmrm::ParameterStore;
using dmrm::Rng;
namespace ad = dmrm::ad;

namespace {

// Central finite differences over every entry of every input parameter
// against the analytic gradient. Returns the worst relative error (absolute
// near zero, same convention as the training-side gradient checker).
double fd_worst(const std::function<ad::Var(ad::Tape&)>& f, const std::vector<Parameter*>& ins,
                double eps = 1e-6) {
    for (Parameter* p : ins) p->zero_grad();
    std::vector<Matrix> analytic;
    {
        ad::Tape t(true);
        t.backward(f(t));
        for (Parameter* p : ins) analytic.push_back(p->grad);
    }
    double worst = 0.0;
    for (std::size_t pi = 0; pi < ins.size(); ++pi) {
        Parameter* p = ins[pi];
        for (long a = 0; a < p->value.size(); ++a) {
            double* slot = p->value.data() + a;
            const double saved = *slot;
            *slot = saved + eps;
            ad::Tape tu(false);
            const double up = f(tu)->value(0, 0);
            *slot = saved - eps;
            ad::Tape td(false);
            const double down = f(td)->value(0, 0);
            *slot = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double exact = analytic[pi].data()[a];
            const double denom = std::max(std::abs(numeric), std::abs(exact));
            const double err =
                denom < 1e-6 ? std::abs(numeric - exact) : std::abs(numeric - exact) / denom;
            worst = std::max(worst, err);
        }
    }
    return worst;
}

// Contracts an op output against a fixed weight matrix so every output entry
// influences the scalar.
ad::Var contract(ad::Tape& t, ad::Var out, const Matrix& w) {
    return ad::sum_all(t, ad::hadamard(t, out, t.input(w)));
}

}  // namespace

TEST_CASE("elementwise and linear ops match finite differences") {
    Rng rng(101);
    ParameterStore ps;
    Parameter& a = ps.create("a", 3, 4);
    Parameter& b = ps.create("b", 3, 4);
    a.value = orc::rand_mat(rng, 3, 4);
    b.value = orc::rand_mat(rng, 3, 4);
    const Matrix w = orc::rand_mat(rng, 3, 4);
    std::vector<Parameter*> ins{&a, &b};

    CHECK(fd_worst([&](ad::Tape& t) { return contract(t, ad::add(t, t.param(a), t.param(b)), w); },
                   ins) < 1e-6);
    CHECK(fd_worst([&](ad::Tape& t) { return contract(t, ad::sub(t, t.param(a), t.param(b)), w); },
                   ins) < 1e-6);
    CHECK(fd_worst(
              [&](ad::Tape& t) { return contract(t, ad::hadamard(t, t.param(a), t.param(b)), w); },
              ins) < 1e-6);
    CHECK(fd_worst([&](ad::Tape& t) { return contract(t, ad::scale(t, t.param(a), -2.5), w); },
                   {&a}) < 1e-6);
    CHECK(fd_worst([&](ad::Tape& t) { return contract(t, ad::tanh(t, t.param(a)), w); }, {&a}) <
          1e-6);
    CHECK(fd_worst([&](ad::Tape& t) { return contract(t, ad::sigmoid(t, t.param(a)), w); }, {&a}) <
          1e-6);
    CHECK(fd_worst([&](ad::Tape& t) { return ad::mean_all(t, t.param(a)); }, {&a}) < 1e-6);

    // keep relu inputs clear of the kink so central differences are exact
    for (long i = 0; i < a.value.size(); ++i)
        if (std::abs(a.value.data()[i]) < 0.1) a.value.data()[i] = 0.2;
    CHECK(fd_worst([&](ad::Tape& t) { return contract(t, ad::relu(t, t.param(a)), w); }, {&a}) <
          1e-6);
}

TEST_CASE("matmul, transpose and slicing match finite differences") {
    Rng rng(202);
    ParameterStore ps;
    Parameter& a = ps.create("a", 3, 5);
    Parameter& b = ps.create("b", 5, 2);
    a.value = orc::rand_mat(rng, 3, 5);
    b.value = orc::rand_mat(rng, 5, 2);
    const Matrix w32 = orc::rand_mat(rng, 3, 2);
    const Matrix w53 = orc::rand_mat(rng, 5, 3);
    const Matrix w25 = orc::rand_mat(rng, 2, 5);
    const Matrix w31 = orc::rand_mat(rng, 3, 1);

    CHECK(fd_worst(
              [&](ad::Tape& t) { return contract(t, ad::matmul(t, t.param(a), t.param(b)), w32); },
              {&a, &b}) < 1e-6);
    CHECK(fd_worst([&](ad::Tape& t) { return contract(t, ad::transpose(t, t.param(a)), w53); },
                   {&a}) < 1e-6);
    CHECK(fd_worst([&](ad::Tape& t) { return contract(t, ad::rows(t, t.param(a), 1, 2), w25); },
                   {&a}) < 1e-6);
    CHECK(fd_worst([&](ad::Tape& t) { return contract(t, ad::col(t, t.param(a), 2), w31); },
                   {&a}) < 1e-6);
}

TEST_CASE("broadcasts and concatenation match finite differences") {
    Rng rng(303);
    ParameterStore ps;
    Parameter& m = ps.create("m", 4, 3);
    Parameter& v = ps.create("v", 4, 1);
    Parameter& n = ps.create("n", 2, 3);
    m.value = orc::rand_mat(rng, 4, 3);
    v.value = orc::rand_mat(rng, 4, 1);
    n.value = orc::rand_mat(rng, 2, 3);
    const Matrix w43 = orc::rand_mat(rng, 4, 3);
    const Matrix w63 = orc::rand_mat(rng, 6, 3);
    const Matrix w46 = orc::rand_mat(rng, 4, 6);

    CHECK(fd_worst(
              [&](ad::Tape& t) {
                  return contract(t, ad::add_col_broadcast(t, t.param(m), t.param(v)), w43);
              },
              {&m, &v}) < 1e-6);
    CHECK(fd_worst(
              [&](ad::Tape& t) {
                  return contract(t, ad::hadamard_col_broadcast(t, t.param(m), t.param(v)), w43);
              },
              {&m, &v}) < 1e-6);
    CHECK(fd_worst(
              [&](ad::Tape& t) {
                  return contract(t, ad::concat_rows(t, {t.param(m), t.param(n)}), w63);
              },
              {&m, &n}) < 1e-6);
    CHECK(fd_worst(
              [&](ad::Tape& t) {
                  return contract(t, ad::concat_cols(t, {t.param(m), t.param(m)}), w46);
              },
              {&m}) < 1e-6);
}

TEST_CASE("softmax family matches oracles and finite differences") {
    Rng rng(404);
    ParameterStore ps;
    Parameter& x = ps.create("x", 6, 1);
    x.value = orc::rand_mat(rng, 6, 1, -3.0, 3.0);
    const Matrix w = orc::rand_mat(rng, 6, 1);

    SUBCASE("values match the loop oracle") {
        ad::Tape t(false);
        CHECK(orc::max_abs_diff(ad::softmax_col(t, t.param(x))->value,
                                orc::softmax_col(x.value)) < 1e-12);
        CHECK(orc::max_abs_diff(ad::log_softmax_col(t, t.param(x))->value,
                                orc::log_softmax_col(x.value)) < 1e-12);
    }

    SUBCASE("softmax output is a simplex") {
        ad::Tape t(false);
        const Matrix y = ad::softmax_col(t, t.param(x))->value;
        double sum = 0.0;
        for (int i = 0; i < y.rows(); ++i) {
            CHECK(y(i, 0) >= 0.0);
            sum += y(i, 0);
        }
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }

    SUBCASE("gradients") {
        CHECK(fd_worst([&](ad::Tape& t) { return contract(t, ad::softmax_col(t, t.param(x)), w); },
                       {&x}) < 1e-6);
        CHECK(fd_worst(
                  [&](ad::Tape& t) { return contract(t, ad::log_softmax_col(t, t.param(x)), w); },
                  {&x}) < 1e-6);
        const std::vector<bool> mask{true, false, true, true, false, true};
        CHECK(fd_worst(
                  [&](ad::Tape& t) { return contract(t, ad::softmax_col(t, t.param(x), &mask), w); },
                  {&x}) < 1e-6);
    }

    SUBCASE("masked entries carry exactly zero weight") {
        const std::vector<bool> mask{true, false, true, false, false, true};
        ad::Tape t(false);
        const Matrix y = ad::softmax_col(t, t.param(x), &mask)->value;
        double sum = 0.0;
        for (int i = 0; i < y.rows(); ++i) {
            if (!mask[i]) CHECK(y(i, 0) == 0.0);
            sum += y(i, 0);
        }
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }

    SUBCASE("all-masked input is rejected") {
        const std::vector<bool> mask(6, false);
        ad::Tape t(false);
        CHECK_THROWS_WITH_AS(ad::softmax_col(t, t.param(x), &mask),
                             "softmax: all positions masked", Error);
    }
}

TEST_CASE("layer_norm matches the oracle and finite differences") {
    Rng rng(505);
    ParameterStore ps;
    Parameter& x = ps.create("x", 5, 1);
    Parameter& gain = ps.create("gain", 5, 1);
    Parameter& bias = ps.create("bias", 5, 1);
    x.value = orc::rand_mat(rng, 5, 1, -2.0, 2.0);
    gain.value = orc::rand_mat(rng, 5, 1, 0.5, 1.5);
    bias.value = orc::rand_mat(rng, 5, 1);
    const Matrix w = orc::rand_mat(rng, 5, 1);

    {
        ad::Tape t(false);
        const Matrix got =
            ad::layer_norm(t, t.param(x), t.param(gain), t.param(bias), 1e-5)->value;
        CHECK(orc::max_abs_diff(got, orc::layer_norm(x.value, gain.value, bias.value, 1e-5)) <
              1e-12);
    }
    {
        // a constant input normalizes to zero, leaving only the bias
        ad::Tape t(false);
        ad::Var cx = t.input(Matrix::Constant(5, 1, 3.7));
        const Matrix got = ad::layer_norm(t, cx, t.param(gain), t.param(bias), 1e-5)->value;
        CHECK(orc::max_abs_diff(got, bias.value) < 1e-12);
    }
    CHECK(fd_worst(
              [&](ad::Tape& t) {
                  return contract(
                      t, ad::layer_norm(t, t.param(x), t.param(gain), t.param(bias), 1e-5), w);
              },
              {&x, &gain, &bias}) < 1e-6);
}

TEST_CASE("embed_cols gathers columns and accumulates repeated ids") {
    Rng rng(606);
    ParameterStore ps;
    Parameter& emb = ps.create("emb", 3, 7);
    emb.value = orc::rand_mat(rng, 3, 7);
    const std::vector<int> ids{2, 5, 2, 0};
    const Matrix w = orc::rand_mat(rng, 3, 4);

    {
        ad::Tape t(false);
        const Matrix got = ad::embed_cols(t, t.param(emb), ids)->value;
        for (std::size_t j = 0; j < ids.size(); ++j)
            for (int i = 0; i < 3; ++i) CHECK(got(i, static_cast<int>(j)) == emb.value(i, ids[j]));
    }
    CHECK(fd_worst([&](ad::Tape& t) { return contract(t, ad::embed_cols(t, t.param(emb), ids), w); },
                   {&emb}) < 1e-6);
    {
        ad::Tape t(false);
        CHECK_THROWS_WITH_AS(ad::embed_cols(t, t.param(emb), {7}), "token id out of range", Error);
    }
}

TEST_CASE("tape contracts") {
    ParameterStore ps;
    Parameter& x = ps.create("x", 2, 2);
    x.value.setConstant(1.0);

    SUBCASE("shape mismatches are rejected") {
        ad::Tape t;
        ad::Var a = t.input(Matrix::Zero(2, 2));
        ad::Var b = t.input(Matrix::Zero(3, 2));
        CHECK_THROWS_WITH_AS(ad::add(t, a, b), "add shape mismatch", Error);
        CHECK_THROWS_WITH_AS(ad::matmul(t, a, b), "matmul shape mismatch", Error);
    }

    SUBCASE("backward requires a scalar root that depends on a parameter") {
        ad::Tape t;
        CHECK_THROWS_WITH_AS(t.backward(t.param(x)), "backward root must be scalar", Error);
        CHECK_THROWS_WITH_AS(t.backward(ad::sum_all(t, t.input(Matrix::Zero(2, 2)))),
                             "backward root does not depend on any parameter", Error);
    }

    SUBCASE("gradient-disabled tapes allocate no gradients and refuse backward") {
        ad::Tape t(false);
        ad::Var leaf = t.param(x);
        ad::Var root = ad::sum_all(t, leaf);
        CHECK(leaf->grad.size() == 0);
        CHECK(root->grad.size() == 0);
        CHECK_FALSE(root->needs_grad);
        CHECK_THROWS_WITH_AS(t.backward(root), "backward on a gradient-disabled tape", Error);
    }

    SUBCASE("parameter leaves accumulate across uses") {
        x.zero_grad();
        ad::Tape t;
        ad::Var s = ad::add(t, ad::sum_all(t, t.param(x)), ad::sum_all(t, t.param(x)));
        t.backward(s);
        CHECK(orc::max_abs_diff(x.grad, Matrix::Constant(2, 2, 2.0)) == 0.0);
    }
}
