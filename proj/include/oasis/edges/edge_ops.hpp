#pragma once

#include <cmath>

#include "oasis/core/types.hpp"

namespace oasis {

struct CannyConfig {
    double low_threshold = 50.0;   // on the 0..255 gradient-magnitude scale
    double high_threshold = 200.0;
    double gaussian_sigma = 1.4;
    bool l2_gradient = true;

    void validate() const {
        if (!(low_threshold > 0.0) || !(low_threshold < high_threshold))
            throw InputError("CannyConfig: need 0 < low_threshold < high_threshold");
        if (!(gaussian_sigma > 0.0)) throw InputError("CannyConfig: gaussian_sigma <= 0");
    }
};

struct FusionConfig {
    float epsilon = 0.5f;  // edge-prior importance
    float beta = 1.0f;     // structure-map importance

    void validate() const {
        if (!(epsilon >= 0.0f) || !std::isfinite(epsilon) || !(beta >= 0.0f) ||
            !std::isfinite(beta))
            throw InputError("FusionConfig: factors must be finite and nonnegative");
    }
};

// Classical Canny: grayscale -> Gaussian -> Sobel -> non-maximum suppression
// -> double threshold -> 8-connected hysteresis. Runs on the 0..255 scale.
EdgeMap canny(const FrameTensor& frame, const CannyConfig& cfg);

// Boundary indicator from label changes in the 8-neighborhood (background to
// background stays 0), dilated to boundary_width.
StructureMap gt_structure_map(const IdMask& mask, int boundary_width = 2);

// level_i + level_i .* (factor * map resized to level_i); binary maps are
// resized as reals. factor == 0 returns the input pyramid unchanged.
FeaturePyramid edge_highlight(const FeaturePyramid& pyramid, const EdgeMap& edges,
                              const FusionConfig& cfg);
FeaturePyramid structure_refine(const FeaturePyramid& pyramid,
                                const StructureMap& structure, const FusionConfig& cfg);

}  // namespace oasis
