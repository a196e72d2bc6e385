#include <vector>

#include "oasis/edges/edge_ops.hpp"

namespace oasis {

StructureMap gt_structure_map(const IdMask& mask, int boundary_width) {
    mask.validate();
    const int h = mask.h, w = mask.w;
    std::vector<uint8_t> boundary((size_t)h * w, 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int32_t v = mask.at(y, x);
            bool hit = false;
            for (int dy = -1; dy <= 1 && !hit; ++dy)
                for (int dx = -1; dx <= 1 && !hit; ++dx) {
                    if (dy == 0 && dx == 0) continue;
                    const int yy = y + dy, xx = x + dx;
                    if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                    const int32_t n = mask.at(yy, xx);
                    if (n != v && (v != 0 || n != 0)) hit = true;
                }
            boundary[(size_t)y * w + x] = hit ? 1 : 0;
        }

    // The two-sided change detector already yields a band of total width 2;
    // boundary_width is the approximate total band width, so grow by
    // (boundary_width/2 - 1) per side. The default of 2 keeps the natural band.
    const int r = boundary_width / 2 - 1;
    StructureMap sm;
    sm.kind = StructureKind::GroundTruthBinary;
    sm.values = Tensor::zeros({1, h, w});
    float* out = sm.values.data();
    if (r <= 0) {
        for (int i = 0; i < h * w; ++i) out[i] = boundary[(size_t)i];
        return sm;
    }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            bool hit = false;
            for (int dy = -r; dy <= r && !hit; ++dy)
                for (int dx = -r; dx <= r && !hit; ++dx) {
                    const int yy = y + dy, xx = x + dx;
                    if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                    if (boundary[(size_t)yy * w + xx]) hit = true;
                }
            out[(size_t)y * w + x] = hit ? 1.0f : 0.0f;
        }
    return sm;
}

}  // namespace oasis
