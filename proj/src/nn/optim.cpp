#include "oasis/nn/optim.hpp"

#include <cmath>

#include "oasis/kern/kernels.hpp"

namespace oasis::nn {

double step_lr(double base_lr, int64_t iter, int64_t total_iters,
               const std::vector<double>& decay_fractions, double decay_factor) {
    double lr = base_lr;
    for (double f : decay_fractions)
        if ((double)iter >= f * (double)total_iters) lr *= decay_factor;
    return lr;
}

double clip_grad_norm(ParamStore& params, double max_norm) {
    double sumsq = 0.0;
    for (auto& e : params.entries()) {
        if (!e.tensor.impl()->grad) continue;
        sumsq += (double)kern::active().reduce_sumsq(e.tensor.impl()->grad->data(),
                                                     e.tensor.impl()->grad->size());
    }
    const double norm = std::sqrt(sumsq);
    if (norm > max_norm && norm > 0.0) {
        const float scale = (float)(max_norm / norm);
        for (auto& e : params.entries()) {
            if (!e.tensor.impl()->grad) continue;
            kern::active().vscale(e.tensor.impl()->grad->data(),
                                  e.tensor.impl()->grad->data(), scale,
                                  e.tensor.impl()->grad->size());
        }
    }
    return norm;
}

AdamW::AdamW(ParamStore& params, Config cfg) : params_(params), cfg_(cfg) {
    for (auto& e : params_.entries()) {
        m_.emplace_back((size_t)e.tensor.numel(), 0.0f);
        v_.emplace_back((size_t)e.tensor.numel(), 0.0f);
    }
}

void AdamW::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, (double)t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, (double)t_);
    for (size_t pi = 0; pi < params_.entries().size(); ++pi) {
        auto& e = params_.entries()[pi];
        if (!e.tensor.impl()->grad) continue;
        const double plr = (e.group == "backbone") ? lr * cfg_.backbone_scale : lr;
        float* w = e.tensor.data();
        const float* g = e.tensor.impl()->grad->data();
        float* m = m_[pi].data();
        float* v = v_[pi].data();
        const int64_t n = e.tensor.numel();
        for (int64_t i = 0; i < n; ++i) {
            m[i] = (float)(cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i]);
            v[i] = (float)(cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * (double)g[i] * g[i]);
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            double upd = mhat / (std::sqrt(vhat) + cfg_.eps);
            upd += cfg_.weight_decay * w[i];
            w[i] = (float)(w[i] - plr * upd);
        }
    }
}

}  // namespace oasis::nn
