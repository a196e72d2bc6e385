#pragma once

#include <functional>

#include "oasis/core/types.hpp"

namespace oasis {

// Region similarity, scaled to [0,100]. Both-empty: 100; one-empty: 0.
double jaccard(const IdMask& pred, const IdMask& gt, int object_id);

// Contour accuracy: 1-pixel boundaries matched bidirectionally within a disk
// of radius ceil(tolerance_frac * image diagonal); F = 100 * 2PR/(P+R).
double boundary_f(const IdMask& pred, const IdMask& gt, int object_id,
                  double tolerance_frac = 0.008);

struct SequenceResult {
    std::vector<int> object_ids;
    std::vector<double> per_object_J;  // [0,100]
    std::vector<double> per_object_F;
    double JF = 0.0;
    int frames_evaluated = 0;

    double mean_J() const;
    double mean_F() const;
};

SequenceResult evaluate_sequence(const std::vector<IdMask>& preds,
                                 const std::vector<IdMask>& gts,
                                 bool skip_first_last = true);

struct FpsResult {
    double fps = 0.0;
    int timed_frames = 0;
    double elapsed_seconds = 0.0;
    std::string hardware;
};

// Wall-clock frames/second of `process` over timed_frames after warmup;
// single stream, any memory updates included in the processing callback.
FpsResult fps_benchmark(const std::function<void(const FrameTensor&)>& process,
                        const std::vector<FrameTensor>& video, int warmup_frames,
                        int timed_frames);

std::string hardware_descriptor();

}  // namespace oasis
