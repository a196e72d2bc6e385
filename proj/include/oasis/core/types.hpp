#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "oasis/tensor/tensor.hpp"

namespace oasis {

// Rejected-input failures; the CLI maps these to exit code 1.
struct InputError : std::runtime_error {
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

constexpr int kNumScales = 3;
constexpr int kObjectGrid = 30;

// One RGB frame, pixels normalized to [0,1], [3,H,W].
struct FrameTensor {
    Tensor pixels;
    int frame_index = 0;
    std::string source_id;

    int height() const { return pixels.shape()[1]; }
    int width() const { return pixels.shape()[2]; }
    void validate() const;
};

// Multi-scale features; level i (1-based) has spatial dims H/2^(i+1).
struct FeaturePyramid {
    std::vector<Tensor> levels;

    void validate(int frame_h, int frame_w) const;
};

// Integer object-id labels, 0 = background.
struct IdMask {
    std::vector<int32_t> labels;  // row-major [H,W]
    int h = 0, w = 0;
    std::vector<int> object_ids;  // sorted, positive

    int32_t at(int y, int x) const { return labels[(size_t)y * w + x]; }
    int32_t& at(int y, int x) { return labels[(size_t)y * w + x]; }
    void validate() const;
    bool operator==(const IdMask& o) const {
        return h == o.h && w == o.w && labels == o.labels && object_ids == o.object_ids;
    }
};

// Per-pixel class distribution [K,H,W]; channel 0 is background.
struct ProbMask {
    Tensor probs;
    std::vector<int> object_ids;

    int num_channels() const { return probs.shape()[0]; }
    void validate() const;
};

enum class StructureKind { GroundTruthBinary, PredictedLogits };

// Single-channel map of target-object boundaries, [1,H,W].
struct StructureMap {
    Tensor values;
    StructureKind kind = StructureKind::PredictedLogits;
};

// Strictly binary [1,H,W].
struct EdgeMap {
    Tensor values;
};

// Rolling store of encoded history: per-frame global features plus the
// EMA-blended per-object summary grid. Owned and mutated by one engine.
struct MemoryState {
    std::vector<Tensor> global_features;  // each [Cg, H/16, W/16]
    Tensor object_features;               // [K-1, Cobj, 30, 30]
    std::vector<int> stored_frame_indices;
    int capacity = 5;

    bool empty() const { return global_features.empty(); }
    void validate() const;
};

// Channel 0 = background indicator, channel k = object_ids[k-1] indicator.
Tensor id_mask_to_onehot(const IdMask& mask, const std::vector<int>& object_ids);

// Per-pixel argmax; ties go to the lowest channel index (background first).
IdMask onehot_to_id_mask(const ProbMask& probs);

ProbMask prob_mask_from_id_mask(const IdMask& mask);

}  // namespace oasis
