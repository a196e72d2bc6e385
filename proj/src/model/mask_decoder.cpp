#include "oasis/model/mask_decoder.hpp"

#include <cmath>

#include "oasis/tensor/ops.hpp"

namespace oasis {

MaskDecoder::MaskDecoder(nn::ParamStore& ps, const std::string& prefix,
                         const MaskDecoderConfig& cfg_, const std::vector<int>& pyr_ch,
                         int object_dim, Rng& rng)
    : cfg(cfg_), object_dim_(object_dim) {
    cfg.validate();
    const int c1 = pyr_ch[0], c2 = pyr_ch[1], c3 = pyr_ch[2];
    const int D = cfg.readout_dim;
    const int d0 = cfg.decoder_channels[0], d1 = cfg.decoder_channels[1],
              d2 = cfg.decoder_channels[2];
    query_proj_ = nn::Conv2d(ps, prefix + ".query", c3, D, 1, 1, 0, rng);
    const float kstd = std::sqrt(2.0f / (float)object_dim);
    key_weight_ = ps.add(prefix + ".key.weight", randn({D, object_dim}, rng, kstd));
    value_weight_ = ps.add(prefix + ".value.weight", randn({D, object_dim}, rng, kstd));
    out_proj_ = nn::Conv2d(ps, prefix + ".out_proj", D, c3, 1, 1, 0, rng);
    block0_ = nn::ResidualBlock(ps, prefix + ".block0", c3, d0, 1, rng, 0.01f);
    up1_ = nn::ConvTranspose2d(ps, prefix + ".up1", d0, d1, 2, 2, rng);
    block1_ = nn::ResidualBlock(ps, prefix + ".block1", d1 + c2, d1, 1, rng, 0.01f);
    up2_ = nn::ConvTranspose2d(ps, prefix + ".up2", d1, d2, 2, 2, rng);
    block2_ = nn::ResidualBlock(ps, prefix + ".block2", d2 + c1, d2, 1, rng, 0.01f);
    head_ = nn::Conv2d(ps, prefix + ".head", d2, 1, 1, 1, 0, rng);
}

Tensor MaskDecoder::readout_one(const Tensor& coarsest, const Tensor& object_feat) const {
    const int h3 = coarsest.shape()[1], w3 = coarsest.shape()[2];
    const int hw = h3 * w3;
    const int D = cfg.readout_dim;
    const int heads = cfg.num_readout_heads;
    const int dh = D / heads;
    const float scale = 1.0f / std::sqrt((float)dh);

    Tensor q = reshape(query_proj_.forward(coarsest), {D, hw});
    Tensor mem = reshape(object_feat, {object_dim_, kObjectGrid * kObjectGrid});
    Tensor keys = matmul(key_weight_, mem);    // [D, 900]
    Tensor values = matmul(value_weight_, mem);

    std::vector<Tensor> head_outs;
    head_outs.reserve((size_t)heads);
    for (int hd = 0; hd < heads; ++hd) {
        Tensor qh = narrow_axis0(q, hd * dh, dh);       // [dh, hw]
        Tensor kh = narrow_axis0(keys, hd * dh, dh);    // [dh, 900]
        Tensor vh = narrow_axis0(values, hd * dh, dh);  // [dh, 900]
        Tensor scores = mul_scalar(matmul(qh, kh, true, false), scale);  // [hw, 900]
        Tensor attn = softmax(scores, 1);
        Tensor out = matmul(attn, vh, false, true);  // [hw, dh]
        head_outs.push_back(transpose2d(out));       // [dh, hw]
    }
    Tensor merged = reshape(concat_axis0(head_outs), {D, h3, w3});
    return add(coarsest, out_proj_.forward(merged));
}

Tensor MaskDecoder::decode(const FeaturePyramid& refined, const MemoryState& state) const {
    if (state.empty() || !state.object_features.defined())
        throw InputError("decode_masks: memory is empty");
    if (refined.levels.size() != kNumScales)
        throw InputError("decode_masks: pyramid must have 3 levels");
    if (state.object_features.shape()[1] != object_dim_)
        throw InputError("decode_masks: object memory channel mismatch");
    const Tensor& l1 = refined.levels[0];
    const Tensor& l2 = refined.levels[1];
    const Tensor& l3 = refined.levels[2];
    if (l3.shape()[0] != query_proj_.weight.shape()[1])
        throw InputError("decode_masks: coarsest level channels do not match decoder");

    const int num_objects = state.object_features.shape()[0];
    const int H = l1.shape()[1] * 4, W = l1.shape()[2] * 4;
    std::vector<Tensor> per_object;
    per_object.reserve((size_t)num_objects);
    for (int k = 0; k < num_objects; ++k) {
        Tensor obj = narrow_axis0(state.object_features, k, 1);
        Tensor attended = readout_one(l3, obj);
        Tensor x = block0_.forward(attended);
        x = up1_.forward(x);
        x = block1_.forward(concat_axis0({x, l2}));
        x = up2_.forward(x);
        x = block2_.forward(concat_axis0({x, l1}));
        Tensor logit_q = head_.forward(x);  // [1, H/4, W/4]
        per_object.push_back(bilinear_resize(logit_q, H, W));
    }
    return concat_axis0(per_object);  // [K-1, H, W]
}

ProbMask aggregate(const Tensor& logits, const std::vector<int>& object_ids) {
    if (!logits.defined() || logits.dim() != 3)
        throw InputError("aggregate: logits must be [K-1,H,W]");
    if (logits.shape()[0] != (int)object_ids.size())
        throw InputError("aggregate: object count mismatch");
    const float* raw = logits.data();
    for (int64_t i = 0; i < logits.numel(); ++i)
        if (!std::isfinite(raw[i])) throw InputError("aggregate: non-finite logit");

    const int n = logits.shape()[0];
    Tensor p = clamp(sigmoid(logits), 1e-6f, 1.0f - 1e-6f);
    Tensor comp = add_scalar(neg(p), 1.0f);  // 1 - p_k

    // u_0 = prod (1-p_j); u_k = odds_k * u_0 = p_k * prod_{j!=k} (1-p_j),
    // formed as prefix/suffix products to avoid the division's rounding
    std::vector<Tensor> prefix((size_t)n + 1), suffix((size_t)n + 1);
    prefix[0] = Tensor::full({1, logits.shape()[1], logits.shape()[2]}, 1.0f);
    suffix[(size_t)n] = prefix[0];
    for (int k = 0; k < n; ++k)
        prefix[(size_t)k + 1] = mul(prefix[(size_t)k], narrow_axis0(comp, k, 1));
    for (int k = n - 1; k >= 0; --k)
        suffix[(size_t)k] = mul(suffix[(size_t)k + 1], narrow_axis0(comp, k, 1));

    std::vector<Tensor> channels;
    channels.reserve((size_t)n + 1);
    channels.push_back(prefix[(size_t)n]);  // background
    for (int k = 0; k < n; ++k)
        channels.push_back(
            mul(narrow_axis0(p, k, 1), mul(prefix[(size_t)k], suffix[(size_t)k + 1])));
    Tensor unnorm = concat_axis0(channels);
    Tensor z = sum_axis(unnorm, 0, true);
    ProbMask pm;
    pm.probs = div(unnorm, z);
    pm.object_ids = object_ids;
    return pm;
}

Tensor prob_logits(const ProbMask& probs) {
    Tensor q = clamp(probs.probs, 1e-7f, 1.0f - 1e-7f);
    return sub(log(q), log(add_scalar(neg(q), 1.0f)));
}

}  // namespace oasis
