#pragma once

#include <memory>
#include <optional>

#include "oasis/edges/edge_ops.hpp"
#include "oasis/model/encoders.hpp"
#include "oasis/model/mask_decoder.hpp"
#include "oasis/model/structure_decoder.hpp"

namespace oasis {

struct ModelConfig {
    ImageEncoderConfig image_encoder;
    MemoryEncoderConfig memory_encoder;
    StructureDecoderConfig structure_decoder;
    MaskDecoderConfig mask_decoder;
    CannyConfig canny;
    FusionConfig fusion;
    bool enable_structure_decoder = true;

    void validate() const {
        image_encoder.validate();
        memory_encoder.validate();
        structure_decoder.validate();
        mask_decoder.validate();
        canny.validate();
        fusion.validate();
    }
};

struct FrameOutput {
    Tensor object_logits;  // [K-1, H, W]
    ProbMask probs;
    std::optional<StructureMap> structure;
};

// The full propagation network: image/memory encoders, edge highlighting,
// structure decoding + refinement, and the mask decoder.
class OasisNet {
public:
    OasisNet(const ModelConfig& cfg, uint64_t init_seed);

    // One step of q_t = h(phi(i_t), y_t, s_t). Memory must be non-empty.
    // run_structure=false bypasses the structure path (pretraining stage).
    FrameOutput forward_frame(const FrameTensor& frame, const MemoryState& memory,
                              const std::vector<int>& object_ids,
                              bool want_structure = false,
                              bool run_structure = true) const;

    std::pair<Tensor, Tensor> encode_memory(const FrameTensor& frame,
                                            const ProbMask& probs) const {
        return memory_encoder_.encode(frame, probs);
    }
    MemoryState update_memory(const MemoryState& state, int frame_index,
                              const Tensor& global_feat, const Tensor& object_feats) const {
        return memory_update(state, frame_index, global_feat, object_feats,
                             cfg.memory_encoder);
    }

    const ImageEncoder& image_encoder() const { return image_encoder_; }
    const StructureDecoder& structure_decoder() const { return structure_decoder_; }
    const MaskDecoder& mask_decoder() const { return mask_decoder_; }
    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }

    ModelConfig cfg;

private:
    nn::ParamStore params_;
    ImageEncoder image_encoder_;
    MemoryEncoder memory_encoder_;
    StructureDecoder structure_decoder_;
    MaskDecoder mask_decoder_;
};

}  // namespace oasis
