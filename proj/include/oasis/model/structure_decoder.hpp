#pragma once

#include "oasis/core/types.hpp"
#include "oasis/nn/layers.hpp"

namespace oasis {

struct StructureDecoderConfig {
    std::vector<int> hidden_channels = {128, 64, 32};  // coarsest block, then per upsample
    float activation_slope = 0.01f;
    bool use_object_fusion = true;

    void validate() const {
        if ((int)hidden_channels.size() != kNumScales)
            throw InputError("StructureDecoderConfig: need 3 hidden channel counts");
        for (int c : hidden_channels)
            if (c <= 0) throw InputError("StructureDecoderConfig: channels must be positive");
    }
};

// Predicts the target-only structure map from edge-enhanced features, with
// pooled object memory added at the coarsest scale. Two stride-2 transposed
// convolutions with skip concatenation bring features to H/4; a 1x1 head
// emits logits which are resized to full resolution.
class StructureDecoder {
public:
    StructureDecoder() = default;
    StructureDecoder(nn::ParamStore& ps, const std::string& prefix,
                     const StructureDecoderConfig& cfg,
                     const std::vector<int>& pyramid_channels, int object_dim, Rng& rng);

    StructureMap predict(const FeaturePyramid& enhanced, const Tensor& object_memory) const;

    StructureDecoderConfig cfg;

private:
    nn::Conv2d fusion_proj_;  // object_dim -> c3, only when use_object_fusion
    nn::ResidualBlock block0_, block1_, block2_;
    nn::ConvTranspose2d up1_, up2_;
    nn::Conv2d head_;
    int object_dim_ = 0;
};

// Mean binary cross-entropy with logits over all pixels.
Tensor structure_supervision_loss(const StructureMap& pred, const StructureMap& target);

}  // namespace oasis
