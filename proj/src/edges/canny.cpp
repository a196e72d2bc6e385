#include <algorithm>
#include <cmath>
#include <vector>

#include "oasis/edges/edge_ops.hpp"

namespace oasis {
namespace {

// Replicate-padded separable Gaussian.
void gaussian_blur(const std::vector<float>& in, int h, int w, double sigma,
                   std::vector<float>& out) {
    const int r = std::max(1, (int)std::ceil(3.0 * sigma));
    std::vector<float> kernel((size_t)(2 * r + 1));
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        const double v = std::exp(-(double)(i * i) / (2.0 * sigma * sigma));
        kernel[(size_t)(i + r)] = (float)v;
        sum += v;
    }
    for (auto& k : kernel) k = (float)(k / sum);

    std::vector<float> tmp((size_t)h * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            float acc = 0.0f;
            for (int i = -r; i <= r; ++i) {
                const int xx = std::clamp(x + i, 0, w - 1);
                acc += kernel[(size_t)(i + r)] * in[(size_t)y * w + xx];
            }
            tmp[(size_t)y * w + x] = acc;
        }
    out.resize((size_t)h * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            float acc = 0.0f;
            for (int i = -r; i <= r; ++i) {
                const int yy = std::clamp(y + i, 0, h - 1);
                acc += kernel[(size_t)(i + r)] * tmp[(size_t)yy * w + x];
            }
            out[(size_t)y * w + x] = acc;
        }
}

}  // namespace

EdgeMap canny(const FrameTensor& frame, const CannyConfig& cfg) {
    cfg.validate();
    frame.validate();
    const int h = frame.height(), w = frame.width();
    const int r = std::max(1, (int)std::ceil(3.0 * cfg.gaussian_sigma));
    if (2 * r + 1 > h || 2 * r + 1 > w)
        throw InputError("canny: frame smaller than the Gaussian kernel support");

    // Luminance on the 0..255 scale so the 50/200 thresholds apply directly.
    std::vector<float> gray((size_t)h * w);
    const float* px = frame.pixels.data();
    const int hw = h * w;
    for (int i = 0; i < hw; ++i)
        gray[(size_t)i] = 255.0f * (0.299f * px[i] + 0.587f * px[hw + i] +
                                    0.114f * px[2 * hw + i]);

    std::vector<float> smooth;
    gaussian_blur(gray, h, w, cfg.gaussian_sigma, smooth);

    // Sobel gradients, replicate padding.
    std::vector<float> mag((size_t)hw, 0.0f);
    std::vector<float> gx_buf((size_t)hw, 0.0f), gy_buf((size_t)hw, 0.0f);
    auto at = [&](int y, int x) {
        return smooth[(size_t)std::clamp(y, 0, h - 1) * w + (size_t)std::clamp(x, 0, w - 1)];
    };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const float gx = (at(y - 1, x + 1) + 2.0f * at(y, x + 1) + at(y + 1, x + 1)) -
                             (at(y - 1, x - 1) + 2.0f * at(y, x - 1) + at(y + 1, x - 1));
            const float gy = (at(y + 1, x - 1) + 2.0f * at(y + 1, x) + at(y + 1, x + 1)) -
                             (at(y - 1, x - 1) + 2.0f * at(y - 1, x) + at(y - 1, x + 1));
            gx_buf[(size_t)y * w + x] = gx;
            gy_buf[(size_t)y * w + x] = gy;
            mag[(size_t)y * w + x] = cfg.l2_gradient
                                         ? std::sqrt(gx * gx + gy * gy)
                                         : std::abs(gx) + std::abs(gy);
        }

    // Non-maximum suppression along the quantized gradient direction.
    std::vector<float> nms((size_t)hw, 0.0f);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const float m = mag[(size_t)y * w + x];
            if (m == 0.0f) continue;
            const float gx = gx_buf[(size_t)y * w + x];
            const float gy = gy_buf[(size_t)y * w + x];
            const float angle = std::atan2(gy, gx);
            // sectors: 0, 45, 90, 135 degrees
            const float deg = angle * 180.0f / (float)M_PI;
            float a = deg < 0.0f ? deg + 180.0f : deg;
            int dy1, dx1;
            if (a < 22.5f || a >= 157.5f) {
                dy1 = 0; dx1 = 1;
            } else if (a < 67.5f) {
                dy1 = 1; dx1 = 1;
            } else if (a < 112.5f) {
                dy1 = 1; dx1 = 0;
            } else {
                dy1 = 1; dx1 = -1;
            }
            auto mg = [&](int yy, int xx) -> float {
                if (yy < 0 || yy >= h || xx < 0 || xx >= w) return 0.0f;
                return mag[(size_t)yy * w + xx];
            };
            // asymmetric tie-break keeps single-pixel ridges at flat maxima
            if (m >= mg(y + dy1, x + dx1) && m > mg(y - dy1, x - dx1))
                nms[(size_t)y * w + x] = m;
        }

    // Double threshold + 8-connected hysteresis grown from strong pixels.
    std::vector<uint8_t> state((size_t)hw, 0);  // 0 none, 1 weak, 2 strong
    std::vector<int> stack;
    for (int i = 0; i < hw; ++i) {
        if (nms[(size_t)i] >= (float)cfg.high_threshold) {
            state[(size_t)i] = 2;
            stack.push_back(i);
        } else if (nms[(size_t)i] >= (float)cfg.low_threshold) {
            state[(size_t)i] = 1;
        }
    }
    while (!stack.empty()) {
        const int i = stack.back();
        stack.pop_back();
        const int y = i / w, x = i % w;
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                const int yy = y + dy, xx = x + dx;
                if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                const int j = yy * w + xx;
                if (state[(size_t)j] == 1) {
                    state[(size_t)j] = 2;
                    stack.push_back(j);
                }
            }
    }

    EdgeMap em;
    em.values = Tensor::zeros({1, h, w});
    float* out = em.values.data();
    for (int i = 0; i < hw; ++i) out[i] = state[(size_t)i] == 2 ? 1.0f : 0.0f;
    return em;
}

}  // namespace oasis
