#pragma once

#include "oasis/core/types.hpp"
#include "oasis/nn/layers.hpp"

namespace oasis {

struct ImageEncoderConfig {
    std::vector<int> channels_per_scale = {32, 64, 128};
    bool pretrained = false;

    void validate() const {
        if ((int)channels_per_scale.size() != kNumScales)
            throw InputError("ImageEncoderConfig: need one channel count per scale");
        for (size_t i = 1; i < channels_per_scale.size(); ++i)
            if (channels_per_scale[i] <= channels_per_scale[i - 1])
                throw InputError("ImageEncoderConfig: channels must strictly increase");
    }
};

struct MemoryEncoderConfig {
    int object_dim = 256;
    int object_grid = kObjectGrid;
    int global_dim = 128;
    int capacity = 5;         // stored frames
    int update_interval = 5;  // store every Nth frame

    void validate() const {
        if (object_dim <= 0 || global_dim <= 0 || capacity <= 0 || update_interval <= 0 ||
            object_grid <= 0)
            throw InputError("MemoryEncoderConfig: all dimensions must be positive");
        if (global_dim % 4 != 0)
            throw InputError("MemoryEncoderConfig: global_dim must be divisible by 4");
    }
};

// Multi-scale image backbone: stem at stride 2, then one residual stage per
// pyramid level, strides 2/2/2 -> levels at H/4, H/8, H/16.
class ImageEncoder {
public:
    ImageEncoder() = default;
    ImageEncoder(nn::ParamStore& ps, const std::string& prefix,
                 const ImageEncoderConfig& cfg, Rng& rng);

    FeaturePyramid encode(const FrameTensor& frame) const;

    ImageEncoderConfig cfg;

private:
    nn::Conv2d stem_;
    nn::GroupNorm stem_gn_;
    nn::ResidualBlock stage1_, stage2_, stage3_;
};

// Encodes frame + mask summary into a global feature at H/16, and projects
// object-masked globals onto the fixed 30x30 object grid.
class MemoryEncoder {
public:
    MemoryEncoder() = default;
    MemoryEncoder(nn::ParamStore& ps, const std::string& prefix,
                  const MemoryEncoderConfig& cfg, Rng& rng);

    // probs must spatially match the frame and carry at least one object.
    // Returns {global [Cg,H/16,W/16], per_object [K-1,Cobj,30,30]}.
    std::pair<Tensor, Tensor> encode(const FrameTensor& frame, const ProbMask& probs) const;

    // The object head alone: resize a (masked) global feature onto the object
    // grid and project it. encode() routes every object through this.
    Tensor project_masked_global(const Tensor& masked_global) const;

    MemoryEncoderConfig cfg;

private:
    nn::Conv2d stem_;
    nn::GroupNorm stem_gn_;
    nn::ResidualBlock stage1_, stage2_, stage3_;
    nn::Conv2d object_proj_;  // bias-free: zero-masked features map to zeros
};

// Append rule: frame 0 always (and never evicted), then every
// update_interval-th frame; FIFO eviction among non-first frames; object
// features blend by EMA on every store.
MemoryState memory_update(const MemoryState& state, int frame_index,
                          const Tensor& global_feature, const Tensor& per_object_features,
                          const MemoryEncoderConfig& cfg, float ema_decay = 0.8f);

}  // namespace oasis
