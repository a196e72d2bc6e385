#include "oasis/engine/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "oasis/io/png_io.hpp"

namespace oasis {
namespace {

double hash01(uint64_t seed, int64_t a, int64_t b, int64_t c) {
    uint64_t z = seed ^ (0x9e3779b97f4a7c15ULL * (uint64_t)(a + 0x10000)) ^
                 (0xbf58476d1ce4e5b9ULL * (uint64_t)(b + 0x20000)) ^
                 (0x94d049bb133111ebULL * (uint64_t)(c + 0x30000));
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return (double)(z >> 11) * 0x1.0p-53;
}

struct SceneObject {
    ShapeKind shape;
    double half = 8.0;  // half-extent / radius
    double x0 = 0.0, y0 = 0.0, vx = 0.0, vy = 0.0;
    float color[3] = {0.8f, 0.2f, 0.2f};
    uint64_t tex_seed = 0;
    int id = 1;
};

bool inside(const SceneObject& o, double cx, double cy, int x, int y) {
    return shape_contains(o.shape, o.half, cx, cy, x, y);
}

void object_center(const SceneObject& o, int t, int canvas, double& cx, double& cy) {
    // reflect at the margin so objects stay >= 1 px inside
    const double margin = o.half + 1.0;
    const double span = (double)canvas - 1.0 - 2.0 * margin;
    auto fold = [&](double p) {
        if (span <= 0.0) return margin;
        double q = std::fmod(p - margin, 2.0 * span);
        if (q < 0.0) q += 2.0 * span;
        return margin + (q <= span ? q : 2.0 * span - q);
    };
    cx = fold(o.x0 + o.vx * (double)t);
    cy = fold(o.y0 + o.vy * (double)t);
}

float object_texel(const SceneObject& o, TextureKind tex, int ch, double cx, double cy,
                   int x, int y) {
    const double lx = (double)x - cx, ly = (double)y - cy;
    float v = o.color[ch];
    switch (tex) {
        case TextureKind::Flat:
            break;
        case TextureKind::Noise: {
            const int64_t qx = (int64_t)std::llround(lx), qy = (int64_t)std::llround(ly);
            v += 0.22f * (float)(hash01(o.tex_seed, qx, qy, ch) - 0.5);
            break;
        }
        case TextureKind::Gradient:
            v *= (float)(0.55 + 0.45 * (lx + o.half) / (2.0 * o.half + 1e-9));
            break;
    }
    return std::clamp(v, 0.0f, 1.0f);
}

float quantize8(float v) { return (float)std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f) / 255.0f; }

SyntheticSequence try_generate(const SyntheticSceneConfig& cfg, uint64_t seed,
                               int attempt, bool& had_occlusion) {
    Rng rng(seed + 0x5851f42d4c957f2dULL * (uint64_t)attempt);
    const int n = cfg.n_objects;
    const int canvas = cfg.canvas;
    const double t_mid = 0.5 * (double)(cfg.n_frames - 1);

    std::vector<SceneObject> objects((size_t)n);
    const double cross_x = canvas * rng.uniform(0.42, 0.58);
    const double cross_y = canvas * rng.uniform(0.42, 0.58);
    const double base_angle = rng.uniform(0.0, 2.0 * M_PI);
    for (int i = 0; i < n; ++i) {
        auto& o = objects[(size_t)i];
        o.id = i + 1;
        o.shape = cfg.shapes[(size_t)rng.uniform_int(0, (int)cfg.shapes.size() - 1)];
        o.half = rng.uniform(canvas / 8.0, canvas / 5.0);
        const double speed = rng.uniform(cfg.min_speed, cfg.max_speed);
        const double angle = base_angle + i * (2.0 * M_PI / std::max(2, n)) +
                             rng.uniform(-0.35, 0.35);
        o.vx = speed * std::cos(angle);
        o.vy = speed * std::sin(angle);
        // paths meet near the crossing point at mid-sequence
        const double jitter = (n >= 2) ? o.half * 0.4 : canvas * 0.2;
        o.x0 = cross_x + rng.uniform(-jitter, jitter) - o.vx * t_mid;
        o.y0 = cross_y + rng.uniform(-jitter, jitter) - o.vy * t_mid;
        o.tex_seed = rng.next_u64();
        for (int c = 0; c < 3; ++c) o.color[c] = (float)rng.uniform(0.25, 0.95);
    }

    // z-order: later entries are painted in front
    std::vector<int> zorder((size_t)n);
    for (int i = 0; i < n; ++i) zorder[(size_t)i] = i;
    for (int i = n - 1; i > 0; --i)
        std::swap(zorder[(size_t)i], zorder[(size_t)rng.uniform_int(0, i)]);

    const uint64_t bg_seed = rng.next_u64();
    const float bg_ax = (float)rng.uniform(0.15, 0.45);
    const float bg_bx = (float)rng.uniform(0.45, 0.75);

    had_occlusion = n < 2;
    SyntheticSequence seq;
    seq.zorder = zorder;
    for (int i = 0; i < n; ++i) {
        ObjectTrack track;
        track.id = objects[(size_t)i].id;
        track.shape = objects[(size_t)i].shape;
        track.half = objects[(size_t)i].half;
        seq.tracks.push_back(track);
    }
    for (int t = 0; t < cfg.n_frames; ++t) {
        FrameTensor frame;
        frame.pixels = Tensor::zeros({3, canvas, canvas});
        frame.frame_index = t;
        IdMask mask;
        mask.h = canvas;
        mask.w = canvas;
        mask.labels.assign((size_t)canvas * canvas, 0);

        std::vector<std::pair<double, double>> centers((size_t)n);
        for (int i = 0; i < n; ++i) {
            object_center(objects[(size_t)i], t, canvas, centers[(size_t)i].first,
                          centers[(size_t)i].second);
            seq.tracks[(size_t)i].centers.push_back(centers[(size_t)i]);
        }

        float* px = frame.pixels.data();
        const int hw = canvas * canvas;
        for (int y = 0; y < canvas; ++y)
            for (int x = 0; x < canvas; ++x) {
                const size_t pi = (size_t)y * canvas + x;
                // textured background: smooth gradient plus static grain
                for (int c = 0; c < 3; ++c) {
                    float v = bg_ax + (bg_bx - bg_ax) *
                                          ((float)(x + y) / (float)(2 * canvas)) +
                              0.12f * (float)(c % 2 == 0 ? 1 : -1) *
                                  ((float)y / (float)canvas - 0.5f);
                    v += 0.08f * (float)(hash01(bg_seed, x, y, c) - 0.5);
                    px[(size_t)c * hw + pi] = std::clamp(v, 0.0f, 1.0f);
                }
                for (int zi = 0; zi < n; ++zi) {
                    const int oi = zorder[(size_t)zi];
                    const auto& o = objects[(size_t)oi];
                    const auto [cx, cy] = centers[(size_t)oi];
                    if (!inside(o, cx, cy, x, y)) continue;
                    mask.labels[pi] = o.id;
                    for (int c = 0; c < 3; ++c)
                        px[(size_t)c * hw + pi] =
                            object_texel(o, cfg.texture, c, cx, cy, x, y);
                }
                for (int c = 0; c < 3; ++c)
                    px[(size_t)c * hw + pi] = quantize8(px[(size_t)c * hw + pi]);
            }

        // visible-vs-solo pixel counts detect a frame where the front object
        // actually hides part of another
        std::vector<int64_t> solo((size_t)n, 0), visible((size_t)n, 0);
        for (int y = 0; y < canvas; ++y)
            for (int x = 0; x < canvas; ++x)
                for (int i = 0; i < n; ++i) {
                    if (inside(objects[(size_t)i], centers[(size_t)i].first,
                               centers[(size_t)i].second, x, y))
                        solo[(size_t)i]++;
                    if (mask.labels[(size_t)y * canvas + x] == i + 1)
                        visible[(size_t)i]++;
                }
        for (int i = 0; i < n; ++i)
            if (visible[(size_t)i] < solo[(size_t)i]) had_occlusion = true;

        std::vector<int> present;
        for (int i = 1; i <= n; ++i)
            if (std::find(mask.labels.begin(), mask.labels.end(), i) != mask.labels.end())
                present.push_back(i);
        mask.object_ids = present;
        seq.frames.push_back(std::move(frame));
        seq.masks.push_back(std::move(mask));
    }
    return seq;
}

}  // namespace

bool shape_contains(ShapeKind shape, double half, double cx, double cy, int x, int y) {
    const double dx = (double)x - cx, dy = (double)y - cy;
    switch (shape) {
        case ShapeKind::Square:
            return std::abs(dx) <= half && std::abs(dy) <= half;
        case ShapeKind::Disk:
            return dx * dx + dy * dy <= half * half;
        case ShapeKind::Triangle:
            // upward-pointing isoceles inside the bounding box
            if (dy < -half || dy > half) return false;
            return std::abs(dx) <= (dy + half) * 0.5;
    }
    return false;
}

SyntheticSequence generate_sequence(const SyntheticSceneConfig& cfg, uint64_t seed) {
    cfg.validate();
    if (cfg.canvas / 5 >= cfg.canvas / 2)
        throw InputError("generate_sequence: objects larger than the canvas");
    for (int attempt = 0; attempt < 64; ++attempt) {
        bool had_occlusion = false;
        SyntheticSequence seq = try_generate(cfg, seed, attempt, had_occlusion);
        // frame 0 must show every object (it seeds propagation)
        if ((int)seq.masks[0].object_ids.size() != cfg.n_objects) continue;
        if (!had_occlusion) continue;
        return seq;
    }
    throw std::runtime_error("generate_sequence: no valid layout found for this seed");
}

std::vector<std::string> generate_synthetic(const SyntheticSceneConfig& cfg,
                                            int n_sequences, uint64_t seed,
                                            const std::filesystem::path& out_root) {
    if (n_sequences <= 0) throw InputError("generate_synthetic: n_sequences must be > 0");
    namespace fs = std::filesystem;
    std::vector<std::string> names;
    for (int s = 0; s < n_sequences; ++s) {
        const SyntheticSequence seq =
            generate_sequence(cfg, seed + 0x9e3779b97f4a7c15ULL * (uint64_t)s);
        char buf[32];
        std::snprintf(buf, sizeof(buf), "synth_%03d", s);
        const std::string name = buf;
        const fs::path img_dir = out_root / "JPEGImages" / name;
        const fs::path ann_dir = out_root / "Annotations" / name;
        fs::create_directories(img_dir);
        fs::create_directories(ann_dir);
        for (size_t t = 0; t < seq.frames.size(); ++t) {
            std::snprintf(buf, sizeof(buf), "%05d", (int)t);
            write_image_rgb(img_dir / (std::string(buf) + ".png"), seq.frames[t].pixels);
            write_palette_mask(ann_dir / (std::string(buf) + ".png"), seq.masks[t]);
        }
        names.push_back(name);
    }
    return names;
}

}  // namespace oasis
