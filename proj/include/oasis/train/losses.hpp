#pragma once

#include "oasis/core/types.hpp"
#include "oasis/tensor/ops.hpp"

namespace oasis {

struct LossConfig {
    double lambda_edl = 0.01;
    int64_t anneal_iters = 200;  // KL ramp length; engine sets 10% of total iters
    int num_points_pretrain = 8192;
    int num_points_main = 12544;
    double dice_smooth = 1.0;

    void validate() const {
        if (lambda_edl < 0.0) throw InputError("LossConfig: lambda_edl < 0");
        if (num_points_pretrain <= 0 || num_points_main <= 0)
            throw InputError("LossConfig: point counts must be positive");
    }
};

struct PointSample {
    std::vector<int> indices;  // linear pixel indices, unique
    Tensor pred_points;        // [K,P], gathered from the input (keeps the graph)
    Tensor target_points;      // [K,P] one-hot constants
};

// 75% of the budget goes to the pixels with the smallest top1-top2 margin of
// `scores`, the rest uniformly at random over the remainder; deterministic
// for a given seed.
PointSample sample_points(const Tensor& scores, const IdMask& target,
                          const std::vector<int>& object_ids, int n_points,
                          uint64_t seed);

// Autograd losses over sampled points [K,P]; pred is a probability tensor for
// ce/dice and a raw logit tensor for edl.
Tensor ce_loss(const Tensor& pred, const Tensor& target);
Tensor dice_loss(const Tensor& pred, const Tensor& target, double smooth = 1.0);
Tensor edl_loss(const Tensor& raw_logits, const Tensor& target, int64_t iteration,
                const LossConfig& cfg);

// Double-precision forwards of the same formulas (logged values, test surface).
double ce_loss_value(const Tensor& pred, const Tensor& target);
double dice_loss_value(const Tensor& pred, const Tensor& target, double smooth = 1.0);

struct EdlValue {
    double first_term = 0.0;  // digamma expression, mean over points
    double kl = 0.0;          // unannealed KL, mean over points
    double kl_weight = 0.0;   // annealing ramp in [0,1]
    double total = 0.0;       // first_term + kl_weight * kl
};
EdlValue edl_loss_value(const Tensor& raw_logits, const Tensor& target,
                        int64_t iteration, const LossConfig& cfg);

struct LossTerms {
    Tensor total;  // autograd scalar: ce + dice + lambda * edl
    double ce = 0.0, dice = 0.0, edl = 0.0, kl_weight = 0.0, total_value = 0.0;
};
LossTerms total_mask_loss(const Tensor& pred_probs_pts, const Tensor& raw_logits_pts,
                          const Tensor& target_pts, int64_t iteration,
                          const LossConfig& cfg);

}  // namespace oasis
