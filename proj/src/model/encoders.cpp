#include "oasis/model/encoders.hpp"

#include "oasis/tensor/ops.hpp"

namespace oasis {

ImageEncoder::ImageEncoder(nn::ParamStore& ps, const std::string& prefix,
                           const ImageEncoderConfig& cfg_, Rng& rng)
    : cfg(cfg_) {
    cfg.validate();
    const int c0 = cfg.channels_per_scale[0];
    const int stem_ch = std::max(8, c0 / 2);
    stem_ = nn::Conv2d(ps, prefix + ".stem", 3, stem_ch, 3, 2, 1, rng, true, "backbone");
    stem_gn_ = nn::GroupNorm(ps, prefix + ".stem_gn", stem_ch,
                             nn::norm_groups_for(stem_ch), "backbone");
    stage1_ = nn::ResidualBlock(ps, prefix + ".stage1", stem_ch, c0, 2, rng, 0.01f,
                                "backbone");
    stage2_ = nn::ResidualBlock(ps, prefix + ".stage2", c0, cfg.channels_per_scale[1], 2,
                                rng, 0.01f, "backbone");
    stage3_ = nn::ResidualBlock(ps, prefix + ".stage3", cfg.channels_per_scale[1],
                                cfg.channels_per_scale[2], 2, rng, 0.01f, "backbone");
}

FeaturePyramid ImageEncoder::encode(const FrameTensor& frame) const {
    frame.validate();
    Tensor x = leaky_relu(stem_gn_.forward(stem_.forward(frame.pixels)), 0.01f);
    FeaturePyramid p;
    p.levels.resize(kNumScales);
    p.levels[0] = stage1_.forward(x);
    p.levels[1] = stage2_.forward(p.levels[0]);
    p.levels[2] = stage3_.forward(p.levels[1]);
    p.validate(frame.height(), frame.width());
    return p;
}

MemoryEncoder::MemoryEncoder(nn::ParamStore& ps, const std::string& prefix,
                             const MemoryEncoderConfig& cfg_, Rng& rng)
    : cfg(cfg_) {
    cfg.validate();
    const int gd = cfg.global_dim;
    stem_ = nn::Conv2d(ps, prefix + ".stem", 5, gd / 4, 3, 2, 1, rng, true, "backbone");
    stem_gn_ = nn::GroupNorm(ps, prefix + ".stem_gn", gd / 4, nn::norm_groups_for(gd / 4),
                             "backbone");
    stage1_ = nn::ResidualBlock(ps, prefix + ".stage1", gd / 4, gd / 2, 2, rng, 0.01f,
                                "backbone");
    stage2_ = nn::ResidualBlock(ps, prefix + ".stage2", gd / 2, gd, 2, rng, 0.01f,
                                "backbone");
    stage3_ = nn::ResidualBlock(ps, prefix + ".stage3", gd, gd, 2, rng, 0.01f, "backbone");
    object_proj_ = nn::Conv2d(ps, prefix + ".object_proj", gd, cfg.object_dim, 1, 1, 0,
                              rng, /*bias=*/false, "head");
}

std::pair<Tensor, Tensor> MemoryEncoder::encode(const FrameTensor& frame,
                                                const ProbMask& probs) const {
    frame.validate();
    const int K = probs.num_channels();
    if (K < 2) throw InputError("encode_memory: probs carry no objects (K < 2)");
    if (probs.probs.shape()[1] != frame.height() || probs.probs.shape()[2] != frame.width())
        throw InputError("encode_memory: probs do not spatially match the frame");

    Tensor bg = narrow_axis0(probs.probs, 0, 1);
    Tensor fg = add_scalar(neg(bg), 1.0f);
    Tensor input = concat_axis0({frame.pixels, fg, bg});

    Tensor x = leaky_relu(stem_gn_.forward(stem_.forward(input)), 0.01f);
    x = stage1_.forward(x);
    x = stage2_.forward(x);
    Tensor global = stage3_.forward(x);  // [gd, H/16, W/16]

    const int gh = global.shape()[1], gw = global.shape()[2];
    std::vector<Tensor> object_feats;
    object_feats.reserve((size_t)K - 1);
    for (int k = 1; k < K; ++k) {
        Tensor pk = narrow_axis0(probs.probs, k, 1);
        Tensor pk_small = bilinear_resize(pk, gh, gw);
        Tensor obj = project_masked_global(mul(global, pk_small));
        object_feats.push_back(reshape(obj, {1, cfg.object_dim, cfg.object_grid,
                                             cfg.object_grid}));
    }
    return {global, concat_axis0(object_feats)};
}

Tensor MemoryEncoder::project_masked_global(const Tensor& masked_global) const {
    Tensor grid = bilinear_resize(masked_global, cfg.object_grid, cfg.object_grid);
    return object_proj_.forward(grid);  // [Cobj,30,30]
}

MemoryState memory_update(const MemoryState& state, int frame_index,
                          const Tensor& global_feature, const Tensor& per_object_features,
                          const MemoryEncoderConfig& cfg, float ema_decay) {
    if (per_object_features.dim() != 4 ||
        per_object_features.shape()[2] != cfg.object_grid ||
        per_object_features.shape()[3] != cfg.object_grid)
        throw InputError("memory_update: object features must be [K-1,C,30,30]");
    if (state.object_features.defined() &&
        state.object_features.shape()[0] != per_object_features.shape()[0])
        throw InputError("memory_update: object count mismatch with stored memory");

    const bool store = frame_index == 0 || frame_index % cfg.update_interval == 0;
    if (!store) return state;

    MemoryState next = state;
    next.capacity = cfg.capacity;
    next.global_features.push_back(global_feature);
    next.stored_frame_indices.push_back(frame_index);
    while ((int)next.global_features.size() > next.capacity) {
        // slot 0 holds frame 0 and is protected
        const size_t victim = next.stored_frame_indices[0] == 0 ? 1 : 0;
        next.global_features.erase(next.global_features.begin() + (long)victim);
        next.stored_frame_indices.erase(next.stored_frame_indices.begin() + (long)victim);
    }
    if (!state.object_features.defined())
        next.object_features = per_object_features;
    else
        next.object_features = add(mul_scalar(state.object_features, ema_decay),
                                   mul_scalar(per_object_features, 1.0f - ema_decay));
    next.validate();
    return next;
}

}  // namespace oasis
