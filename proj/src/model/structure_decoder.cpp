#include "oasis/model/structure_decoder.hpp"

#include "oasis/tensor/ops.hpp"

namespace oasis {

StructureDecoder::StructureDecoder(nn::ParamStore& ps, const std::string& prefix,
                                   const StructureDecoderConfig& cfg_,
                                   const std::vector<int>& pyr_ch, int object_dim,
                                   Rng& rng)
    : cfg(cfg_), object_dim_(object_dim) {
    cfg.validate();
    const int c1 = pyr_ch[0], c2 = pyr_ch[1], c3 = pyr_ch[2];
    const int h0 = cfg.hidden_channels[0], h1 = cfg.hidden_channels[1],
              h2 = cfg.hidden_channels[2];
    const float s = cfg.activation_slope;
    if (cfg.use_object_fusion)
        fusion_proj_ = nn::Conv2d(ps, prefix + ".fusion_proj", object_dim, c3, 1, 1, 0, rng);
    block0_ = nn::ResidualBlock(ps, prefix + ".block0", c3, h0, 1, rng, s);
    up1_ = nn::ConvTranspose2d(ps, prefix + ".up1", h0, h1, 2, 2, rng);
    block1_ = nn::ResidualBlock(ps, prefix + ".block1", h1 + c2, h1, 1, rng, s);
    up2_ = nn::ConvTranspose2d(ps, prefix + ".up2", h1, h2, 2, 2, rng);
    block2_ = nn::ResidualBlock(ps, prefix + ".block2", h2 + c1, h2, 1, rng, s);
    head_ = nn::Conv2d(ps, prefix + ".head", h2, 1, 1, 1, 0, rng);
}

StructureMap StructureDecoder::predict(const FeaturePyramid& enhanced,
                                       const Tensor& object_memory) const {
    if (enhanced.levels.size() != kNumScales)
        throw InputError("predict_structure: pyramid must have 3 levels");
    const Tensor& l1 = enhanced.levels[0];
    const Tensor& l2 = enhanced.levels[1];
    const Tensor& l3 = enhanced.levels[2];
    if (l3.shape()[0] != block0_.conv1.weight.shape()[1])
        throw InputError("predict_structure: coarsest level channels do not match decoder");

    Tensor fused = l3;
    if (cfg.use_object_fusion) {
        if (!object_memory.defined())
            throw InputError("predict_structure: object memory required when fusion is on");
        if (object_memory.dim() != 4 || object_memory.shape()[1] != object_dim_)
            throw InputError("predict_structure: object memory channel mismatch");
        Tensor pooled = mean_axis(object_memory, 0, false);  // [Cobj,30,30]
        Tensor proj = fusion_proj_.forward(pooled);
        Tensor resized = bilinear_resize(proj, l3.shape()[1], l3.shape()[2]);
        fused = add(l3, resized);
    }

    Tensor x = block0_.forward(fused);
    x = up1_.forward(x);
    x = block1_.forward(concat_axis0({x, l2}));
    x = up2_.forward(x);
    x = block2_.forward(concat_axis0({x, l1}));
    Tensor logits_q = head_.forward(x);  // [1, H/4, W/4]

    const int H = l1.shape()[1] * 4, W = l1.shape()[2] * 4;
    StructureMap out;
    out.kind = StructureKind::PredictedLogits;
    out.values = bilinear_resize(logits_q, H, W);
    return out;
}

Tensor structure_supervision_loss(const StructureMap& pred, const StructureMap& target) {
    if (pred.kind != StructureKind::PredictedLogits)
        throw InputError("structure_supervision_loss: pred must be PREDICTED_LOGITS");
    if (target.kind != StructureKind::GroundTruthBinary)
        throw InputError("structure_supervision_loss: target must be GROUND_TRUTH_BINARY");
    if (pred.values.shape() != target.values.shape())
        throw InputError("structure_supervision_loss: shape mismatch");
    return bce_with_logits_mean(pred.values, target.values);
}

}  // namespace oasis
