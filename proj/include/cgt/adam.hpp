#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "cgt/params.hpp"

namespace cgt {

// Adam with bias correction (beta1=0.9, beta2=0.999, eps=1e-8, no weight
// decay). Moment buffers are keyed by position in the parameter store and
// shape-checked on every step.
template <typename T>
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t t = 0;
    std::vector<Tensor<T>> m;
    std::vector<Tensor<T>> v;

    void init(const ParameterStore<T>& params) {
        t = 0;
        m.clear();
        v.clear();
        m.reserve(params.size());
        v.reserve(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            m.push_back(Tensor<T>::zeros(params.at(i).tensor.shape));
            v.push_back(Tensor<T>::zeros(params.at(i).tensor.shape));
        }
    }
};

template <typename T>
void adam_step(ParameterStore<T>& params, AdamState<T>& state, double lr) {
    if (!(lr > 0.0)) throw DataError("adam_step: lr must be positive");
    if (state.m.size() != params.size()) throw DataError("adam_step: state/parameter count mismatch");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Parameter<T>& p = params.at(pi);
        if (!p.trainable) continue;
        p.tensor.ensure_grad();
        Tensor<T>& mw = state.m[pi];
        Tensor<T>& vw = state.v[pi];
        if (mw.numel() != p.tensor.numel() || vw.numel() != p.tensor.numel())
            throw DataError("adam_step: moment shape mismatch for " + p.name);
        const std::size_t n = p.tensor.numel();
        for (std::size_t i = 0; i < n; ++i) {
            const double g = static_cast<double>(p.tensor.grad[i]);
            const double mi = state.beta1 * static_cast<double>(mw.data[i]) + (1.0 - state.beta1) * g;
            const double vi = state.beta2 * static_cast<double>(vw.data[i]) + (1.0 - state.beta2) * g * g;
            mw.data[i] = static_cast<T>(mi);
            vw.data[i] = static_cast<T>(vi);
            const double mhat = mi / bc1;
            const double vhat = vi / bc2;
            p.tensor.data[i] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + state.eps));
        }
    }
}

} // namespace cgt
