#include "oasis/train/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace oasis {
namespace {

double softplus_d(double x) {
    if (x > 30.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

double anneal_ramp(int64_t iteration, int64_t anneal_iters) {
    if (anneal_iters <= 0) return 1.0;
    return std::min(1.0, (double)iteration / (double)anneal_iters);
}

void check_points_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.dim() != 2 || b.dim() != 2 || a.shape() != b.shape())
        throw InputError(std::string(what) + ": pred/target must both be [K,P]");
}

}  // namespace

PointSample sample_points(const Tensor& scores, const IdMask& target,
                          const std::vector<int>& object_ids, int n_points,
                          uint64_t seed) {
    if (scores.dim() != 3) throw InputError("sample_points: scores must be [K,H,W]");
    const int K = scores.shape()[0];
    const int h = scores.shape()[1], w = scores.shape()[2];
    const int hw = h * w;
    if (K != (int)object_ids.size() + 1)
        throw InputError("sample_points: channel count must equal |object_ids|+1");
    if (target.h != h || target.w != w)
        throw InputError("sample_points: target mask size mismatch");
    if (n_points <= 0 || n_points > hw)
        throw InputError("sample_points: n_points must be in [1, H*W]");

    // top1 - top2 margin per pixel
    std::vector<float> margin((size_t)hw);
    const float* s = scores.data();
    for (int i = 0; i < hw; ++i) {
        float top1 = -3.4e38f, top2 = -3.4e38f;
        for (int k = 0; k < K; ++k) {
            const float v = s[(size_t)k * hw + i];
            if (v > top1) {
                top2 = top1;
                top1 = v;
            } else if (v > top2) {
                top2 = v;
            }
        }
        margin[(size_t)i] = top1 - top2;
    }

    // Shuffle first so margin ties (and the random quota) are seed-uniform.
    std::vector<int> order((size_t)hw);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    for (int i = hw - 1; i > 0; --i)
        std::swap(order[(size_t)i], order[(size_t)rng.uniform_int(0, i)]);

    std::vector<int> by_margin = order;
    std::stable_sort(by_margin.begin(), by_margin.end(), [&](int a, int b) {
        return margin[(size_t)a] < margin[(size_t)b];
    });

    const int n_uncertain = (int)((int64_t)n_points * 3 / 4);
    std::vector<uint8_t> taken((size_t)hw, 0);
    PointSample out;
    out.indices.reserve((size_t)n_points);
    for (int i = 0; i < n_uncertain; ++i) {
        out.indices.push_back(by_margin[(size_t)i]);
        taken[(size_t)by_margin[(size_t)i]] = 1;
    }
    for (int i = 0; i < hw && (int)out.indices.size() < n_points; ++i) {
        const int px = order[(size_t)i];
        if (!taken[(size_t)px]) {
            out.indices.push_back(px);
            taken[(size_t)px] = 1;
        }
    }

    out.pred_points = gather_cols(reshape(scores, {K, hw}), out.indices);
    out.target_points = Tensor::zeros({K, n_points});
    float* tp = out.target_points.data();
    for (int p = 0; p < n_points; ++p) {
        const int32_t label = target.labels[(size_t)out.indices[(size_t)p]];
        int ch = 0;
        if (label != 0) {
            const auto it =
                std::lower_bound(object_ids.begin(), object_ids.end(), (int)label);
            if (it == object_ids.end() || *it != (int)label)
                throw InputError("sample_points: target label not in object_ids");
            ch = 1 + (int)(it - object_ids.begin());
        }
        tp[(size_t)ch * n_points + p] = 1.0f;
    }
    return out;
}

Tensor ce_loss(const Tensor& pred, const Tensor& target) {
    check_points_shape(pred, target, "ce_loss");
    Tensor p_true = sum_axis(mul(pred, target), 0, false);  // [P]
    return neg(mean_all(log(clamp(p_true, 1e-12f, 3.4e38f))));
}

double ce_loss_value(const Tensor& pred, const Tensor& target) {
    check_points_shape(pred, target, "ce_loss");
    const int K = pred.shape()[0], P = pred.shape()[1];
    const float* p = pred.data();
    const float* t = target.data();
    double acc = 0.0;
    for (int i = 0; i < P; ++i) {
        double ptrue = 0.0;
        for (int k = 0; k < K; ++k) ptrue += (double)t[(size_t)k * P + i] * p[(size_t)k * P + i];
        acc += -std::log(std::max(ptrue, 1e-12));
    }
    return acc / (double)P;
}

Tensor dice_loss(const Tensor& pred, const Tensor& target, double smooth) {
    check_points_shape(pred, target, "dice_loss");
    Tensor inter = sum_axis(mul(pred, target), 1, false);  // [K]
    Tensor num = add_scalar(mul_scalar(inter, 2.0f), (float)smooth);
    Tensor den = add_scalar(add(sum_axis(pred, 1, false), sum_axis(target, 1, false)),
                            (float)smooth);
    return mean_all(add_scalar(neg(div(num, den)), 1.0f));
}

double dice_loss_value(const Tensor& pred, const Tensor& target, double smooth) {
    check_points_shape(pred, target, "dice_loss");
    const int K = pred.shape()[0], P = pred.shape()[1];
    const float* p = pred.data();
    const float* t = target.data();
    double acc = 0.0;
    for (int k = 0; k < K; ++k) {
        double inter = 0.0, sp = 0.0, st = 0.0;
        for (int i = 0; i < P; ++i) {
            inter += (double)p[(size_t)k * P + i] * t[(size_t)k * P + i];
            sp += p[(size_t)k * P + i];
            st += t[(size_t)k * P + i];
        }
        acc += 1.0 - (2.0 * inter + smooth) / (sp + st + smooth);
    }
    return acc / (double)K;
}

Tensor edl_loss(const Tensor& raw_logits, const Tensor& target, int64_t iteration,
                const LossConfig& cfg) {
    check_points_shape(raw_logits, target, "edl_loss");
    const float* lp = raw_logits.data();
    for (int64_t i = 0; i < raw_logits.numel(); ++i)
        if (!std::isfinite(lp[i])) throw InputError("edl_loss: non-finite logit");

    Tensor alpha = add_scalar(softplus(raw_logits), 1.0f);  // [K,P]
    Tensor strength = sum_axis(alpha, 0, true);             // [1,P]
    Tensor gap = sub(digamma(strength), digamma(alpha));    // broadcast [K,P]
    Tensor first = mean_all(sum_axis(mul(target, gap), 0, false));

    const double ramp = anneal_ramp(iteration, cfg.anneal_iters);
    if (ramp == 0.0) return first;

    // alpha with true-class evidence removed
    Tensor one_minus_t = add_scalar(neg(target), 1.0f);
    Tensor alpha_tilde = add(target, mul(one_minus_t, alpha));
    Tensor s_tilde = sum_axis(alpha_tilde, 0, true);  // [1,P]
    const int K = raw_logits.shape()[0];
    Tensor kl = sub(lgamma(s_tilde), Tensor::scalar((float)std::lgamma((double)K)));
    kl = sub(kl, sum_axis(lgamma(alpha_tilde), 0, true));
    Tensor corr = mul(add_scalar(alpha_tilde, -1.0f),
                      sub(digamma(alpha_tilde), digamma(s_tilde)));
    kl = add(kl, sum_axis(corr, 0, true));
    return add(first, mul_scalar(mean_all(kl), (float)ramp));
}

EdlValue edl_loss_value(const Tensor& raw_logits, const Tensor& target,
                        int64_t iteration, const LossConfig& cfg) {
    check_points_shape(raw_logits, target, "edl_loss");
    const int K = raw_logits.shape()[0], P = raw_logits.shape()[1];
    const float* lp = raw_logits.data();
    const float* tp = target.data();
    for (int64_t i = 0; i < raw_logits.numel(); ++i)
        if (!std::isfinite(lp[i])) throw InputError("edl_loss: non-finite logit");

    EdlValue out;
    out.kl_weight = anneal_ramp(iteration, cfg.anneal_iters);
    double first_acc = 0.0, kl_acc = 0.0;
    std::vector<double> alpha((size_t)K);
    for (int i = 0; i < P; ++i) {
        double strength = 0.0;
        for (int k = 0; k < K; ++k) {
            alpha[(size_t)k] = 1.0 + softplus_d((double)lp[(size_t)k * P + i]);
            strength += alpha[(size_t)k];
        }
        const double dig_s = digamma_d(strength);
        double s_tilde = 0.0;
        double lg_sum = 0.0, corr = 0.0;
        for (int k = 0; k < K; ++k) {
            const double t = (double)tp[(size_t)k * P + i];
            first_acc += t * (dig_s - digamma_d(alpha[(size_t)k]));
            const double at = t + (1.0 - t) * alpha[(size_t)k];
            s_tilde += at;
            lg_sum += std::lgamma(at);
            corr += (at - 1.0) * digamma_d(at);
        }
        const double dig_st = digamma_d(s_tilde);
        // sum (at-1)*(psi(at)-psi(st)) == corr - (st - K) * psi(st)
        kl_acc += std::lgamma(s_tilde) - lg_sum - std::lgamma((double)K) + corr -
                  (s_tilde - (double)K) * dig_st;
    }
    out.first_term = first_acc / (double)P;
    out.kl = kl_acc / (double)P;
    out.total = out.first_term + out.kl_weight * out.kl;
    return out;
}

LossTerms total_mask_loss(const Tensor& pred_probs_pts, const Tensor& raw_logits_pts,
                          const Tensor& target_pts, int64_t iteration,
                          const LossConfig& cfg) {
    cfg.validate();
    LossTerms out;
    Tensor ce = ce_loss(pred_probs_pts, target_pts);
    Tensor dice = dice_loss(pred_probs_pts, target_pts, cfg.dice_smooth);
    out.ce = ce_loss_value(pred_probs_pts, target_pts);
    out.dice = dice_loss_value(pred_probs_pts, target_pts, cfg.dice_smooth);
    const EdlValue ev = edl_loss_value(raw_logits_pts, target_pts, iteration, cfg);
    out.edl = ev.total;
    out.kl_weight = ev.kl_weight;
    out.total = add(ce, dice);
    if (cfg.lambda_edl > 0.0) {
        Tensor edl = edl_loss(raw_logits_pts, target_pts, iteration, cfg);
        out.total = add(out.total, mul_scalar(edl, (float)cfg.lambda_edl));
    }
    out.total_value = out.ce + out.dice + cfg.lambda_edl * out.edl;
    return out;
}

}  // namespace oasis
