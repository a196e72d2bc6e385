#pragma once

#include <vector>

#include "oasis/nn/layers.hpp"

namespace oasis::nn {

// Step-decay schedule: base_lr * factor^(#decay points passed). Decay points
// are fractions of total_iters.
double step_lr(double base_lr, int64_t iter, int64_t total_iters,
               const std::vector<double>& decay_fractions, double decay_factor);

// Global L2-norm clipping over every parameter grad; returns the pre-clip norm.
double clip_grad_norm(ParamStore& params, double max_norm);

// Adam with decoupled weight decay. Parameters in the "backbone" group use
// lr * backbone_scale.
class AdamW {
public:
    struct Config {
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        double weight_decay = 1e-4;
        double backbone_scale = 1.0;
    };

    AdamW(ParamStore& params, Config cfg);
    void step(double lr);
    int64_t iterations() const { return t_; }

private:
    ParamStore& params_;
    Config cfg_;
    int64_t t_ = 0;
    std::vector<std::vector<float>> m_, v_;
};

}  // namespace oasis::nn
