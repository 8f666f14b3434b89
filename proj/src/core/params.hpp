#pragma once

#include <Eigen/Core>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "error.hpp"
#include "rng.hpp"

namespace dmrm {

using Matrix = Eigen::MatrixXd;

// One named trainable array plus its accumulated gradient and Adam state.
struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;
    Matrix adam_m;
    Matrix adam_v;
    // Columns excluded from updates (used to pin the PAD embedding at zero).
    std::vector<int> frozen_cols;

    Parameter(std::string n, Matrix v)
        : name(std::move(n)),
          value(std::move(v)),
          grad(Matrix::Zero(value.rows(), value.cols())),
          adam_m(Matrix::Zero(value.rows(), value.cols())),
          adam_v(Matrix::Zero(value.rows(), value.cols())) {}

    void zero_grad() { grad.setZero(); }
};

// Ordered collection of parameters. Iteration order is creation order, which
// keeps optimizer sweeps, checkpoints and gradient reports deterministic.
class ParameterStore {
public:
    Parameter& create(const std::string& name, int rows, int cols) {
        require(by_name_.count(name) == 0, "duplicate parameter name: " + name);
        params_.push_back(std::make_unique<Parameter>(name, Matrix::Zero(rows, cols)));
        by_name_[name] = params_.back().get();
        return *params_.back();
    }

    // Glorot-uniform init, the default for every weight and bias. Unit layer
    // gain matters here: the reasoning stack chains several perceptrons and
    // Hadamard products per hop, and a smaller bound (e.g. 1/sqrt(fan_in))
    // attenuates gradients below Adam's epsilon by the first hop, freezing it.
    Parameter& create_uniform(const std::string& name, int rows, int cols, int fan_in, Rng& rng) {
        Parameter& p = create(name, rows, cols);
        const double bound = std::sqrt(6.0 / (static_cast<double>(fan_in) + rows));
        for (int c = 0; c < cols; ++c)
            for (int r = 0; r < rows; ++r) p.value(r, c) = rng.uniform(-bound, bound);
        return p;
    }

    Parameter& get(const std::string& name) {
        auto it = by_name_.find(name);
        require(it != by_name_.end(), "unknown parameter: " + name);
        return *it->second;
    }

    const Parameter& get(const std::string& name) const {
        auto it = by_name_.find(name);
        require(it != by_name_.end(), "unknown parameter: " + name);
        return *it->second;
    }

    bool has(const std::string& name) const { return by_name_.count(name) != 0; }

    std::vector<Parameter*> all() {
        std::vector<Parameter*> out;
        out.reserve(params_.size());
        for (auto& p : params_) out.push_back(p.get());
        return out;
    }

    std::vector<const Parameter*> all() const {
        std::vector<const Parameter*> out;
        out.reserve(params_.size());
        for (auto& p : params_) out.push_back(p.get());
        return out;
    }

    void zero_grads() {
        for (auto& p : params_) p->zero_grad();
    }

    std::size_t size() const { return params_.size(); }

private:
    std::vector<std::unique_ptr<Parameter>> params_;
    std::unordered_map<std::string, Parameter*> by_name_;
};

}  // namespace dmrm
