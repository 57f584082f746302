#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "gstk/tensor.hpp"

namespace gs {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;  // decoupled
};

// Adam with decoupled weight decay: the decay multiplies the parameter before
// the bias-corrected Adam delta is applied.
template <class S>
class AdamT {
public:
    AdamT(std::vector<TensorT<S>> params, AdamConfig cfg)
        : params_(std::move(params)), cfg_(cfg) {
        m_.reserve(params_.size());
        v_.reserve(params_.size());
        for (const auto& p : params_) {
            m_.emplace_back(p.numel(), S(0));
            v_.emplace_back(p.numel(), S(0));
        }
    }

    long step_count() const { return t_; }

    void zero_grad() {
        for (auto& p : params_) p.zero_grad();
    }

    void step() {
        ++t_;
        const S lr = static_cast<S>(cfg_.lr);
        const S b1 = static_cast<S>(cfg_.beta1);
        const S b2 = static_cast<S>(cfg_.beta2);
        const S eps = static_cast<S>(cfg_.eps);
        const S decay = static_cast<S>(1.0 - cfg_.lr * cfg_.weight_decay);
        const S c1 = static_cast<S>(1.0 / (1.0 - std::pow(cfg_.beta1, t_)));
        const S c2 = static_cast<S>(1.0 / (1.0 - std::pow(cfg_.beta2, t_)));

        for (std::size_t pi = 0; pi < params_.size(); ++pi) {
            auto& p = params_[pi];
            const auto& g = p.grad();
            if (checked_mode()) {
                for (S gv : g) {
                    if (!std::isfinite(gv)) {
                        throw NumericError("non-finite gradient in adam step " +
                                           std::to_string(t_));
                    }
                }
            }
            std::vector<S>& m = m_[pi];
            std::vector<S>& v = v_[pi];
            S* pv = p.data();
            for (std::size_t i = 0; i < m.size(); ++i) {
                pv[i] *= decay;
                m[i] = b1 * m[i] + (S(1) - b1) * g[i];
                v[i] = b2 * v[i] + (S(1) - b2) * g[i] * g[i];
                pv[i] -= lr * (m[i] * c1) / (std::sqrt(v[i] * c2) + eps);
            }
        }
    }

private:
    std::vector<TensorT<S>> params_;
    std::vector<std::vector<S>> m_, v_;
    AdamConfig cfg_;
    long t_ = 0;
};

using Adam = AdamT<float>;

}  // namespace gs
