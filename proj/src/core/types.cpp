#include "oasis/core/types.hpp"

#include <algorithm>
#include <cmath>

namespace oasis {

void FrameTensor::validate() const {
    if (!pixels.defined() || pixels.dim() != 3 || pixels.shape()[0] != 3)
        throw InputError("FrameTensor: pixels must be [3,H,W]");
    const int h = height(), w = width();
    if (h < 16 || w < 16) throw InputError("FrameTensor: H and W must be >= 16");
    if (h % 16 != 0 || w % 16 != 0)
        throw InputError("FrameTensor: H and W must be divisible by 16");
    const float* p = pixels.data();
    const int64_t n = pixels.numel();
    for (int64_t i = 0; i < n; ++i)
        if (!std::isfinite(p[i])) throw InputError("FrameTensor: non-finite pixel value");
    if (frame_index < 0) throw InputError("FrameTensor: negative frame_index");
}

void FeaturePyramid::validate(int frame_h, int frame_w) const {
    if ((int)levels.size() != kNumScales)
        throw InputError("FeaturePyramid: expected exactly 3 levels");
    int prev_c = 0;
    for (int i = 0; i < kNumScales; ++i) {
        const auto& s = levels[(size_t)i].shape();
        if (s.size() != 3) throw InputError("FeaturePyramid: level must be [C,h,w]");
        const int div = 1 << (i + 2);
        if (s[1] != frame_h / div || s[2] != frame_w / div)
            throw InputError("FeaturePyramid: level " + std::to_string(i + 1) +
                             " spatial dims violate h_i = H/2^(i+1)");
        if (s[0] <= prev_c)
            throw InputError("FeaturePyramid: channel counts must strictly increase");
        prev_c = s[0];
    }
}

void IdMask::validate() const {
    if ((int64_t)labels.size() != (int64_t)h * w)
        throw InputError("IdMask: label buffer does not match H*W");
    for (size_t i = 1; i < object_ids.size(); ++i)
        if (object_ids[i] <= object_ids[i - 1])
            throw InputError("IdMask: object_ids must be sorted and unique");
    for (int id : object_ids)
        if (id <= 0) throw InputError("IdMask: object ids must be positive");
    for (int32_t v : labels) {
        if (v == 0) continue;
        if (!std::binary_search(object_ids.begin(), object_ids.end(), (int)v))
            throw InputError("IdMask: label " + std::to_string(v) +
                             " not present in object_ids");
    }
}

void ProbMask::validate() const {
    if (!probs.defined() || probs.dim() != 3)
        throw InputError("ProbMask: probs must be [K,H,W]");
    const int K = probs.shape()[0];
    if (K != (int)object_ids.size() + 1)
        throw InputError("ProbMask: K must equal |object_ids|+1");
    const int hw = probs.shape()[1] * probs.shape()[2];
    const float* p = probs.data();
    for (int i = 0; i < hw; ++i) {
        float s = 0.0f;
        for (int k = 0; k < K; ++k) {
            const float v = p[(size_t)k * hw + i];
            if (v < -1e-6f || v > 1.0f + 1e-6f)
                throw InputError("ProbMask: probability outside [0,1]");
            s += v;
        }
        if (std::abs(s - 1.0f) > 1e-5f)
            throw InputError("ProbMask: channel sum deviates from 1");
    }
}

void MemoryState::validate() const {
    if ((int)global_features.size() > capacity)
        throw InputError("MemoryState: stored frames exceed capacity");
    if (global_features.size() != stored_frame_indices.size())
        throw InputError("MemoryState: index/feature count mismatch");
    if (object_features.defined()) {
        const auto& s = object_features.shape();
        if (s.size() != 4 || s[2] != kObjectGrid || s[3] != kObjectGrid)
            throw InputError("MemoryState: object features must be [K-1,C,30,30]");
    }
}

Tensor id_mask_to_onehot(const IdMask& mask, const std::vector<int>& object_ids) {
    for (int32_t v : mask.labels) {
        if (v == 0) continue;
        if (!std::binary_search(object_ids.begin(), object_ids.end(), (int)v))
            throw InputError("id_mask_to_onehot: unknown label id " + std::to_string(v));
    }
    const int K = (int)object_ids.size() + 1;
    const int hw = mask.h * mask.w;
    Tensor out = Tensor::zeros({K, mask.h, mask.w});
    float* p = out.data();
    for (int i = 0; i < hw; ++i) {
        const int32_t v = mask.labels[(size_t)i];
        int ch = 0;
        if (v != 0) {
            const auto it = std::lower_bound(object_ids.begin(), object_ids.end(), (int)v);
            ch = 1 + (int)(it - object_ids.begin());
        }
        p[(size_t)ch * hw + i] = 1.0f;
    }
    return out;
}

IdMask onehot_to_id_mask(const ProbMask& pm) {
    pm.validate();
    const int K = pm.num_channels();
    const int h = pm.probs.shape()[1], w = pm.probs.shape()[2];
    const int hw = h * w;
    IdMask out;
    out.h = h;
    out.w = w;
    out.labels.assign((size_t)hw, 0);
    out.object_ids = pm.object_ids;
    const float* p = pm.probs.data();
    for (int i = 0; i < hw; ++i) {
        int best = 0;
        float bestv = p[i];
        for (int k = 1; k < K; ++k) {
            const float v = p[(size_t)k * hw + i];
            if (v > bestv) {  // strict: ties keep the lower channel
                bestv = v;
                best = k;
            }
        }
        out.labels[(size_t)i] = best == 0 ? 0 : pm.object_ids[(size_t)best - 1];
    }
    return out;
}

ProbMask prob_mask_from_id_mask(const IdMask& mask) {
    ProbMask pm;
    pm.probs = id_mask_to_onehot(mask, mask.object_ids);
    pm.object_ids = mask.object_ids;
    return pm;
}

}  // namespace oasis
