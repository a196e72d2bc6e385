#include "oasis/eval/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>

#include "oasis/kern/kernels.hpp"

namespace oasis {
namespace {

void check_shapes(const IdMask& pred, const IdMask& gt, const char* what) {
    if (pred.h != gt.h || pred.w != gt.w)
        throw InputError(std::string(what) + ": mask shapes differ");
}

std::vector<uint8_t> object_boundary(const IdMask& m, int id) {
    std::vector<uint8_t> b((size_t)m.h * m.w, 0);
    for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x) {
            if (m.at(y, x) != id) continue;
            bool edge = y == 0 || y == m.h - 1 || x == 0 || x == m.w - 1;
            if (!edge)
                edge = m.at(y - 1, x) != id || m.at(y + 1, x) != id ||
                       m.at(y, x - 1) != id || m.at(y, x + 1) != id;
            if (edge) b[(size_t)y * m.w + x] = 1;
        }
    return b;
}

std::vector<uint8_t> dilate_disk(const std::vector<uint8_t>& b, int h, int w, int r) {
    std::vector<uint8_t> out((size_t)h * w, 0);
    std::vector<std::pair<int, int>> offsets;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
            if (dy * dy + dx * dx <= r * r) offsets.emplace_back(dy, dx);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!b[(size_t)y * w + x]) continue;
            for (const auto& [dy, dx] : offsets) {
                const int yy = y + dy, xx = x + dx;
                if (yy >= 0 && yy < h && xx >= 0 && xx < w) out[(size_t)yy * w + xx] = 1;
            }
        }
    return out;
}

int64_t count(const std::vector<uint8_t>& v) {
    int64_t n = 0;
    for (uint8_t x : v) n += x;
    return n;
}

int64_t count_covered(const std::vector<uint8_t>& pts, const std::vector<uint8_t>& mask) {
    int64_t n = 0;
    for (size_t i = 0; i < pts.size(); ++i) n += (pts[i] && mask[i]) ? 1 : 0;
    return n;
}

}  // namespace

double jaccard(const IdMask& pred, const IdMask& gt, int object_id) {
    check_shapes(pred, gt, "jaccard");
    int64_t inter = 0, uni = 0;
    for (size_t i = 0; i < pred.labels.size(); ++i) {
        const bool p = pred.labels[i] == object_id;
        const bool g = gt.labels[i] == object_id;
        inter += (p && g) ? 1 : 0;
        uni += (p || g) ? 1 : 0;
    }
    if (uni == 0) return 100.0;  // both empty
    return 100.0 * (double)inter / (double)uni;
}

double boundary_f(const IdMask& pred, const IdMask& gt, int object_id,
                  double tolerance_frac) {
    check_shapes(pred, gt, "boundary_f");
    const int h = pred.h, w = pred.w;
    const auto pb = object_boundary(pred, object_id);
    const auto gb = object_boundary(gt, object_id);
    const int64_t np = count(pb), ng = count(gb);
    if (np == 0 && ng == 0) return 100.0;
    if (np == 0 || ng == 0) return 0.0;

    const int r = (int)std::ceil(tolerance_frac * std::sqrt((double)h * h + (double)w * w));
    const auto gb_dil = dilate_disk(gb, h, w, r);
    const auto pb_dil = dilate_disk(pb, h, w, r);
    const double precision = (double)count_covered(pb, gb_dil) / (double)np;
    const double recall = (double)count_covered(gb, pb_dil) / (double)ng;
    if (precision + recall == 0.0) return 0.0;
    return 100.0 * 2.0 * precision * recall / (precision + recall);
}

double SequenceResult::mean_J() const {
    double s = 0.0;
    for (double v : per_object_J) s += v;
    return per_object_J.empty() ? 0.0 : s / (double)per_object_J.size();
}

double SequenceResult::mean_F() const {
    double s = 0.0;
    for (double v : per_object_F) s += v;
    return per_object_F.empty() ? 0.0 : s / (double)per_object_F.size();
}

SequenceResult evaluate_sequence(const std::vector<IdMask>& preds,
                                 const std::vector<IdMask>& gts, bool skip_first_last) {
    if (preds.size() != gts.size())
        throw InputError("evaluate_sequence: pred/gt length mismatch");
    if (preds.empty()) throw InputError("evaluate_sequence: empty sequence");

    std::set<int> ids;
    for (const auto& g : gts)
        for (int id : g.object_ids) ids.insert(id);

    size_t first = 0, last = preds.size();
    if (skip_first_last && preds.size() > 2) {
        first = 1;
        last = preds.size() - 1;
    }

    SequenceResult res;
    res.frames_evaluated = (int)(last - first);
    for (int id : ids) {
        double sj = 0.0, sf = 0.0;
        for (size_t t = first; t < last; ++t) {
            sj += jaccard(preds[t], gts[t], id);
            sf += boundary_f(preds[t], gts[t], id);
        }
        res.object_ids.push_back(id);
        res.per_object_J.push_back(sj / (double)res.frames_evaluated);
        res.per_object_F.push_back(sf / (double)res.frames_evaluated);
    }
    res.JF = 0.5 * (res.mean_J() + res.mean_F());
    return res;
}

std::string hardware_descriptor() {
    std::string model = "unknown-cpu";
    std::ifstream in("/proc/cpuinfo");
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("model name", 0) == 0) {
            const auto pos = line.find(':');
            if (pos != std::string::npos) {
                model = line.substr(pos + 1);
                while (!model.empty() && model.front() == ' ') model.erase(model.begin());
            }
            break;
        }
    }
    return model + " / kernels=" + kern::active().name;
}

FpsResult fps_benchmark(const std::function<void(const FrameTensor&)>& process,
                        const std::vector<FrameTensor>& video, int warmup_frames,
                        int timed_frames) {
    if (timed_frames <= 0) throw InputError("fps_benchmark: timed_frames must be > 0");
    if (warmup_frames < 0) throw InputError("fps_benchmark: warmup_frames must be >= 0");
    if ((int)video.size() < warmup_frames + timed_frames)
        throw InputError("fps_benchmark: video shorter than warmup + timed frames");

    for (int i = 0; i < warmup_frames; ++i) process(video[(size_t)i]);
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < timed_frames; ++i)
        process(video[(size_t)(warmup_frames + i)]);
    const auto t1 = std::chrono::steady_clock::now();

    FpsResult res;
    res.timed_frames = timed_frames;
    res.elapsed_seconds = std::chrono::duration<double>(t1 - t0).count();
    res.fps = (double)timed_frames / res.elapsed_seconds;
    res.hardware = hardware_descriptor();
    return res;
}

}  // namespace oasis
