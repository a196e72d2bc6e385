#include "oasis/model/oasis_net.hpp"

#include "oasis/tensor/ops.hpp"

namespace oasis {

OasisNet::OasisNet(const ModelConfig& cfg_, uint64_t init_seed) : cfg(cfg_) {
    cfg.validate();
    Rng rng(init_seed);
    image_encoder_ = ImageEncoder(params_, "image_encoder", cfg.image_encoder, rng);
    memory_encoder_ = MemoryEncoder(params_, "memory_encoder", cfg.memory_encoder, rng);
    if (cfg.enable_structure_decoder)
        structure_decoder_ =
            StructureDecoder(params_, "structure_decoder", cfg.structure_decoder,
                             cfg.image_encoder.channels_per_scale,
                             cfg.memory_encoder.object_dim, rng);
    mask_decoder_ = MaskDecoder(params_, "mask_decoder", cfg.mask_decoder,
                                cfg.image_encoder.channels_per_scale,
                                cfg.memory_encoder.object_dim, rng);
}

FrameOutput OasisNet::forward_frame(const FrameTensor& frame, const MemoryState& memory,
                                    const std::vector<int>& object_ids,
                                    bool want_structure, bool run_structure) const {
    if (memory.empty() || !memory.object_features.defined())
        throw InputError("forward_frame: memory is empty");

    FeaturePyramid raw = image_encoder_.encode(frame);
    EdgeMap edges = canny(frame, cfg.canny);
    FeaturePyramid enhanced = edge_highlight(raw, edges, cfg.fusion);

    FrameOutput out;
    FeaturePyramid features_for_mask = enhanced;
    if (cfg.enable_structure_decoder && run_structure) {
        Tensor obj_mem = cfg.structure_decoder.use_object_fusion ? memory.object_features
                                                                 : Tensor();
        StructureMap structure = structure_decoder_.predict(enhanced, obj_mem);
        features_for_mask = structure_refine(raw, structure, cfg.fusion);
        if (want_structure || GradMode::enabled()) out.structure = structure;
    }
    out.object_logits = mask_decoder_.decode(features_for_mask, memory);
    out.probs = aggregate(out.object_logits, object_ids);
    return out;
}

}  // namespace oasis
