#pragma once

#include <iosfwd>
#include <optional>

#include "oasis/engine/config.hpp"

namespace oasis {

struct PropagateResult {
    std::vector<IdMask> masks;
    std::vector<ProbMask> probs;
    std::vector<std::optional<StructureMap>> structures;  // only when requested
};

// Eq. 1-2 inference over a video: frame 0 passes the given mask through
// verbatim and seeds memory; each later frame is predicted from memory built
// strictly from earlier frames, then (per the update policy) added to memory
// using its own prediction.
PropagateResult propagate_video(const std::vector<FrameTensor>& frames,
                                const IdMask& first_mask, const OasisNet& net,
                                bool want_structures = false);

struct SequenceSample {
    std::vector<FrameTensor> frames;
    std::vector<IdMask> masks;  // dense ground truth
};
using TrainDataset = std::vector<SequenceSample>;

struct TrainLogEntry {
    int64_t iter = 0;
    double ce = 0, dice = 0, edl = 0, kl_weight = 0, structure = 0, total = 0;
    double lr = 0, grad_norm = 0;
};

struct TrainResult {
    std::vector<TrainLogEntry> log;
};

// Main training stage: windows of seq_len frames, predicted masks feed the
// memory after frame 0, per-frame mask losses plus structure supervision,
// gradient clipping and the step-decayed AdamW update. Bit-reproducible for
// a given seed. Emits one JSON line per log_interval to `log_stream`.
TrainResult train(const TrainDataset& data, OasisNet& net, const TrainConfig& tcfg,
                  const LossConfig& lcfg, std::ostream* log_stream = nullptr);

struct ImageMaskPair {
    FrameTensor frame;
    IdMask mask;
};

// Static pretraining: 3-frame pseudo-videos from mirrored/affine-warped
// cut-and-paste composites of two sources; CE + Dice only, the structure
// decoder and the uncertainty loss are excluded at this stage.
TrainResult pretrain_static(const std::vector<ImageMaskPair>& pairs, OasisNet& net,
                            const TrainConfig& tcfg, const LossConfig& lcfg,
                            std::ostream* log_stream = nullptr);

// One pretraining pseudo-video: a cut-and-paste composite of two sources,
// replayed as 3 frames under a growing affine transform (mirror fixed per
// video). Exposed so its contract is directly testable.
void build_pretrain_window(const std::vector<ImageMaskPair>& pairs, Rng& rng,
                           std::vector<FrameTensor>& frames, std::vector<IdMask>& masks);

struct AffineParams {
    double angle_deg = 0.0;
    double scale = 1.0;
    double tx = 0.0, ty = 0.0;
    bool mirror = false;
};

FrameTensor warp_affine_frame(const FrameTensor& frame, const AffineParams& params);
IdMask warp_affine_mask(const IdMask& mask, const AffineParams& params);

}  // namespace oasis
