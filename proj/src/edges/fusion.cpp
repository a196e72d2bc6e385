#include "oasis/edges/edge_ops.hpp"
#include "oasis/tensor/ops.hpp"

namespace oasis {
namespace {

FeaturePyramid fuse(const FeaturePyramid& pyramid, const Tensor& map, float factor,
                    const char* what) {
    if (!map.defined() || map.dim() != 3 || map.shape()[0] != 1)
        throw InputError(std::string(what) + ": map must be [1,H,W]");
    if (pyramid.levels.size() != kNumScales)
        throw InputError(std::string(what) + ": pyramid must have 3 levels");
    const int mh = map.shape()[1], mw = map.shape()[2];
    for (int i = 0; i < kNumScales; ++i) {
        const auto& s = pyramid.levels[(size_t)i].shape();
        const int div = 1 << (i + 2);
        if (s[1] != mh / div || s[2] != mw / div)
            throw InputError(std::string(what) +
                             ": map spatial size does not match the pyramid's frame");
    }
    if (factor == 0.0f) return pyramid;  // exact identity

    FeaturePyramid out;
    out.levels.reserve(pyramid.levels.size());
    for (const auto& level : pyramid.levels) {
        const int h = level.shape()[1], w = level.shape()[2];
        Tensor resized = bilinear_resize(map, h, w);
        Tensor scaled = mul_scalar(resized, factor);
        out.levels.push_back(add(level, mul(level, scaled)));
    }
    return out;
}

}  // namespace

FeaturePyramid edge_highlight(const FeaturePyramid& pyramid, const EdgeMap& edges,
                              const FusionConfig& cfg) {
    cfg.validate();
    return fuse(pyramid, edges.values, cfg.epsilon, "edge_highlight");
}

FeaturePyramid structure_refine(const FeaturePyramid& pyramid,
                                const StructureMap& structure, const FusionConfig& cfg) {
    cfg.validate();
    if (structure.kind != StructureKind::PredictedLogits)
        throw InputError("structure_refine: expects a PREDICTED_LOGITS structure map");
    return fuse(pyramid, structure.values, cfg.beta, "structure_refine");
}

}  // namespace oasis
