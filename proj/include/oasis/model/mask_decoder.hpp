#pragma once

#include "oasis/core/types.hpp"
#include "oasis/nn/layers.hpp"

namespace oasis {

struct MaskDecoderConfig {
    int readout_dim = 128;
    int num_readout_heads = 4;
    std::vector<int> decoder_channels = {128, 64, 32};

    void validate() const {
        if (readout_dim <= 0 || num_readout_heads <= 0 ||
            readout_dim % num_readout_heads != 0)
            throw InputError("MaskDecoderConfig: readout_dim must divide by heads");
        if ((int)decoder_channels.size() != kNumScales)
            throw InputError("MaskDecoderConfig: need 3 decoder channel counts");
    }
};

// Final segmentation head. Each object's 30x30 memory attends into the
// coarsest refined level (pixels query objects, multi-head scaled dot
// product); the attended features run through the same upsample-and-skip
// decoder as the structure path, one shared-weight pass per object.
class MaskDecoder {
public:
    MaskDecoder() = default;
    MaskDecoder(nn::ParamStore& ps, const std::string& prefix, const MaskDecoderConfig& cfg,
                const std::vector<int>& pyramid_channels, int object_dim, Rng& rng);

    // -> per-object logit maps [K-1, H, W]
    Tensor decode(const FeaturePyramid& refined, const MemoryState& state) const;

    MaskDecoderConfig cfg;

private:
    Tensor readout_one(const Tensor& coarsest, const Tensor& object_feat) const;

    nn::Conv2d query_proj_, out_proj_;
    Tensor key_weight_, value_weight_;  // [D, Cobj]
    nn::ResidualBlock block0_, block1_, block2_;
    nn::ConvTranspose2d up1_, up2_;
    nn::Conv2d head_;
    int object_dim_ = 0;
};

// Soft aggregation: per-object sigmoid probabilities, product-of-complements
// background, odds-weighted renormalization; channels sum to one per pixel.
ProbMask aggregate(const Tensor& logits, const std::vector<int>& object_ids);

// Per-class log-odds of an aggregated ProbMask, used as the evidence input
// of the uncertainty loss. [K,H,W]
Tensor prob_logits(const ProbMask& probs);

}  // namespace oasis
