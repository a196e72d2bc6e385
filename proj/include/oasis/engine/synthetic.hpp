#pragma once

#include <filesystem>

#include "oasis/engine/config.hpp"

namespace oasis {

// Per-object ground-truth geometry, kept so tests can re-rasterize
// analytically and occlusion can be verified against solo coverage.
struct ObjectTrack {
    int id = 1;
    ShapeKind shape = ShapeKind::Disk;
    double half = 8.0;                              // half-extent / radius
    std::vector<std::pair<double, double>> centers;  // one (cx,cy) per frame
};

struct SyntheticSequence {
    std::string name;
    std::vector<FrameTensor> frames;
    std::vector<IdMask> masks;
    std::vector<ObjectTrack> tracks;
    std::vector<int> zorder;  // paint order, later entries in front
};

// Shape membership used by the rasterizer (pixel (x,y) against the center).
bool shape_contains(ShapeKind shape, double half, double cx, double cy, int x, int y);

// Moving textured shapes over a textured background. With n_objects >= 2 the
// trajectories are constructed to cross mid-sequence; overlap pixels belong
// to the front object of the per-sequence z-order. Deterministic per seed;
// pixel values are pre-quantized to the 8-bit grid the PNGs will carry.
SyntheticSequence generate_sequence(const SyntheticSceneConfig& cfg, uint64_t seed);

// Writes n_sequences in DAVIS layout (JPEGImages/ + Annotations/) under root.
std::vector<std::string> generate_synthetic(const SyntheticSceneConfig& cfg,
                                            int n_sequences, uint64_t seed,
                                            const std::filesystem::path& out_root);

}  // namespace oasis
