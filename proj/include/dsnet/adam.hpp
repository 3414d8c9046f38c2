#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dsnet/ops.hpp"
#include "dsnet/tensor.hpp"

namespace dsnet {

using GradMap = std::map<std::string, Tensor>;

/// Named trainable parameters plus their Adam moments. The step counter is
/// shared across every parameter in the store.
class ParamStore {
public:
    Tensor& create(const std::string& path, Shape4 shape) {
        auto [it, inserted] = params_.emplace(path, Tensor::zeros(shape, /*requires_grad=*/true));
        if (!inserted) {
            throw ContractError("ParamStore: parameter '" + path + "' already exists");
        }
        return it->second;
    }

    Tensor& at(const std::string& path) {
        auto it = params_.find(path);
        if (it == params_.end()) throw ContractError("ParamStore: no parameter '" + path + "'");
        return it->second;
    }
    const Tensor& at(const std::string& path) const {
        auto it = params_.find(path);
        if (it == params_.end()) throw ContractError("ParamStore: no parameter '" + path + "'");
        return it->second;
    }

    bool contains(const std::string& path) const { return params_.count(path) != 0; }

    /// Parameters in deterministic (lexicographic) order.
    std::map<std::string, Tensor>& items() { return params_; }
    const std::map<std::string, Tensor>& items() const { return params_; }

    std::size_t size() const { return params_.size(); }

    std::int64_t scalar_count() const {
        std::int64_t total = 0;
        for (const auto& [path, t] : params_) total += t.numel();
        return total;
    }

    std::int64_t step_count() const { return step_; }

private:
    friend void adam_step(ParamStore&, const GradMap&, double, double, double, double, double);

    struct Moments {
        std::vector<double> m;
        std::vector<double> v;
    };

    std::map<std::string, Tensor> params_;
    std::map<std::string, Moments> moments_;
    std::int64_t step_ = 0;
};

/// Collect gradients of `loss` for every parameter in the store. Parameters
/// the loss does not depend on get zero gradients.
inline GradMap backward(const Tensor& loss, const ParamStore& store) {
    backward(loss);
    GradMap grads;
    for (const auto& [path, param] : store.items()) {
        const std::vector<double>& g = param.grad();
        if (g.empty()) {
            grads.emplace(path, Tensor::zeros(param.shape()));
        } else {
            grads.emplace(path, Tensor::from_data(param.shape(), g));
        }
    }
    return grads;
}

/// One bias-corrected Adam update with coupled L2 weight decay
/// (gradient += weight_decay * param). Increments the shared step counter.
inline void adam_step(ParamStore& store, const GradMap& grads, double lr, double weight_decay,
                      double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    const std::int64_t t = ++store.step_;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (auto& [path, param] : store.params_) {
        auto git = grads.find(path);
        if (git == grads.end()) {
            throw ContractError("adam_step: gradient map is missing parameter '" + path + "'");
        }
        const Tensor& grad = git->second;
        if (!(grad.shape() == param.shape())) {
            throw ContractError("adam_step: gradient shape " + grad.shape().str() +
                                " does not match parameter '" + path + "' " + param.shape().str());
        }
        auto& mom = store.moments_[path];
        const std::size_t n = static_cast<std::size_t>(param.numel());
        if (mom.m.size() != n) {
            mom.m.assign(n, 0.0);
            mom.v.assign(n, 0.0);
        }
        double* p = param.data();
        const double* g = grad.data();
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::isfinite(g[i])) {
                throw NumericError("adam_step: non-finite gradient in parameter '" + path + "'");
            }
            const double gi = g[i] + weight_decay * p[i];
            mom.m[i] = beta1 * mom.m[i] + (1.0 - beta1) * gi;
            mom.v[i] = beta2 * mom.v[i] + (1.0 - beta2) * gi * gi;
            const double mhat = mom.m[i] / bc1;
            const double vhat = mom.v[i] / bc2;
            p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

}  // namespace dsnet
