#include "oasis/engine/engine.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "oasis/edges/edge_ops.hpp"
#include "oasis/nn/optim.hpp"

namespace oasis {
namespace {

MemoryState seed_memory(const OasisNet& net, const FrameTensor& frame,
                        const ProbMask& probs) {
    auto [global, objects] = net.encode_memory(frame, probs);
    MemoryState state;
    state.capacity = net.cfg.memory_encoder.capacity;
    return net.update_memory(state, 0, global, objects);
}

IdMask crop_mask(const IdMask& m, int oy, int ox, int size) {
    IdMask out;
    out.h = size;
    out.w = size;
    out.labels.resize((size_t)size * size);
    std::vector<int> present;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) out.at(y, x) = m.at(oy + y, ox + x);
    for (int id : m.object_ids)
        if (std::find(out.labels.begin(), out.labels.end(), id) != out.labels.end())
            present.push_back(id);
    out.object_ids = present;
    return out;
}

FrameTensor crop_frame(const FrameTensor& f, int oy, int ox, int size) {
    FrameTensor out;
    out.frame_index = f.frame_index;
    out.source_id = f.source_id;
    out.pixels = Tensor::zeros({3, size, size});
    const int H = f.height(), W = f.width();
    const float* src = f.pixels.data();
    float* dst = out.pixels.data();
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < size; ++y)
            std::copy(src + ((size_t)c * H + oy + y) * W + ox,
                      src + ((size_t)c * H + oy + y) * W + ox + size,
                      dst + ((size_t)c * size + y) * size);
    return out;
}

// Drops labels outside `ids` to background (windows cropped past an object).
IdMask restrict_mask(const IdMask& m, const std::vector<int>& ids) {
    IdMask out = m;
    std::vector<int> present;
    for (auto& v : out.labels)
        if (v != 0 && !std::binary_search(ids.begin(), ids.end(), (int)v)) v = 0;
    for (int id : ids)
        if (std::find(out.labels.begin(), out.labels.end(), id) != out.labels.end())
            present.push_back(id);
    out.object_ids = present;
    return out;
}

struct WindowLosses {
    Tensor total;
    double ce = 0, dice = 0, edl = 0, kl_weight = 0, structure = 0;
    int frames = 0;
};

// Forward + losses over one training window. Frame 0 memory comes from the
// ground truth; later frames feed their own predictions back.
WindowLosses run_window(OasisNet& net, const std::vector<FrameTensor>& frames,
                        const std::vector<IdMask>& masks, int64_t iteration,
                        const LossConfig& lcfg, int n_points, bool use_structure,
                        bool edl_enabled, Rng& seed_rng) {
    const std::vector<int>& ids = masks[0].object_ids;
    ProbMask first_probs = prob_mask_from_id_mask(masks[0]);
    MemoryState state = seed_memory(net, frames[0], first_probs);

    LossConfig frame_cfg = lcfg;
    if (!edl_enabled) frame_cfg.lambda_edl = 0.0;

    WindowLosses acc;
    for (size_t t = 1; t < frames.size(); ++t) {
        FrameOutput out = net.forward_frame(frames[t], state, ids, use_structure,
                                            use_structure);
        const IdMask target = restrict_mask(masks[t], ids);
        PointSample sample = sample_points(out.probs.probs, target, ids, n_points,
                                           seed_rng.next_u64());
        const int K = out.probs.num_channels();
        const int hw = frames[t].height() * frames[t].width();
        Tensor logits_pts =
            gather_cols(reshape(prob_logits(out.probs), {K, hw}), sample.indices);
        LossTerms terms = total_mask_loss(sample.pred_points, logits_pts,
                                          sample.target_points, iteration, frame_cfg);
        Tensor frame_loss = terms.total;
        acc.ce += terms.ce;
        acc.dice += terms.dice;
        acc.edl += terms.edl;
        acc.kl_weight = terms.kl_weight;
        if (use_structure && net.cfg.enable_structure_decoder) {
            StructureMap gt = gt_structure_map(target);
            Tensor sl = structure_supervision_loss(*out.structure, gt);
            acc.structure += (double)sl.item();
            frame_loss = add(frame_loss, sl);
        }
        acc.total = acc.frames == 0 ? frame_loss : add(acc.total, frame_loss);
        acc.frames++;

        // memory update with the prediction; skip the encoder when the
        // update policy would drop the frame anyway
        if ((int)t % net.cfg.memory_encoder.update_interval == 0) {
            auto [global, objects] = net.encode_memory(frames[t], out.probs);
            state = net.update_memory(state, (int)t, global, objects);
        }
    }
    return acc;
}

TrainResult train_impl(const TrainDataset& data, OasisNet& net, const TrainConfig& tcfg,
                       const LossConfig& lcfg, std::ostream* log_stream, int n_points,
                       bool use_structure, bool edl_enabled,
                       const std::function<void(Rng&, int, std::vector<FrameTensor>&,
                                                std::vector<IdMask>&)>& make_window) {
    tcfg.validate();
    lcfg.validate();
    if (data.empty()) throw InputError("train: empty dataset");

    nn::AdamW::Config ocfg;
    ocfg.weight_decay = tcfg.weight_decay;
    ocfg.backbone_scale = tcfg.backbone_lr_scale;
    nn::AdamW opt(net.params(), ocfg);
    Rng rng(tcfg.seed);

    TrainResult result;
    for (int64_t iter = 0; iter < tcfg.total_iters; ++iter) {
        const double lr = nn::step_lr(tcfg.base_lr, iter, tcfg.total_iters,
                                      tcfg.lr_decay_points, tcfg.lr_decay_factor);
        net.params().zero_grads();

        Tensor batch_total;
        TrainLogEntry entry;
        entry.iter = iter;
        int total_frames = 0;
        for (int b = 0; b < tcfg.batch; ++b) {
            std::vector<FrameTensor> wframes;
            std::vector<IdMask> wmasks;
            make_window(rng, b, wframes, wmasks);
            WindowLosses wl = run_window(net, wframes, wmasks, iter, lcfg, n_points,
                                         use_structure, edl_enabled, rng);
            entry.ce += wl.ce;
            entry.dice += wl.dice;
            entry.edl += wl.edl;
            entry.kl_weight = wl.kl_weight;
            entry.structure += wl.structure;
            batch_total = b == 0 ? wl.total : add(batch_total, wl.total);
            total_frames += wl.frames;
        }
        Tensor loss = mul_scalar(batch_total, 1.0f / (float)total_frames);
        const double loss_value = (double)loss.item();
        entry.ce /= total_frames;
        entry.dice /= total_frames;
        entry.edl /= total_frames;
        entry.structure /= total_frames;
        entry.total = loss_value;
        entry.lr = lr;

        if (!std::isfinite(loss_value)) {
            std::ostringstream diag;
            diag << "train: non-finite loss at iteration " << iter << " (ce=" << entry.ce
                 << " dice=" << entry.dice << " edl=" << entry.edl
                 << " structure=" << entry.structure << ")";
            if (log_stream) *log_stream << "{\"error\":\"" << diag.str() << "\"}\n";
            throw std::runtime_error(diag.str());
        }

        loss.backward();
        entry.grad_norm = nn::clip_grad_norm(net.params(), tcfg.grad_clip_norm);
        opt.step(lr);

        result.log.push_back(entry);
        if (log_stream && (iter % tcfg.log_interval == 0 || iter == tcfg.total_iters - 1))
            *log_stream << "{\"iter\":" << entry.iter << ",\"ce\":" << entry.ce
                        << ",\"dice\":" << entry.dice << ",\"edl\":" << entry.edl
                        << ",\"kl_weight\":" << entry.kl_weight
                        << ",\"structure\":" << entry.structure
                        << ",\"total\":" << entry.total << ",\"lr\":" << entry.lr
                        << ",\"grad_norm\":" << entry.grad_norm << "}\n";
    }
    return result;
}

}  // namespace

PropagateResult propagate_video(const std::vector<FrameTensor>& frames,
                                const IdMask& first_mask, const OasisNet& net,
                                bool want_structures) {
    if (frames.empty()) throw InputError("propagate_video: empty frame list");
    first_mask.validate();
    if (first_mask.object_ids.empty())
        throw InputError("propagate_video: first mask has no objects");
    if (first_mask.h != frames[0].height() || first_mask.w != frames[0].width())
        throw InputError("propagate_video: mask/frame size mismatch");
    for (const auto& f : frames)
        if (f.height() != frames[0].height() || f.width() != frames[0].width())
            throw InputError("propagate_video: frames differ in size");

    NoGradGuard no_grad;
    const std::vector<int>& ids = first_mask.object_ids;
    PropagateResult res;
    res.masks.push_back(first_mask);
    ProbMask probs0 = prob_mask_from_id_mask(first_mask);
    res.probs.push_back(probs0);
    res.structures.emplace_back(std::nullopt);

    MemoryState state = seed_memory(net, frames[0], probs0);
    for (size_t t = 1; t < frames.size(); ++t) {
        FrameOutput out = net.forward_frame(frames[t], state, ids, want_structures);
        res.masks.push_back(onehot_to_id_mask(out.probs));
        res.probs.push_back(out.probs);
        res.structures.push_back(want_structures ? out.structure : std::nullopt);
        if ((int)t % net.cfg.memory_encoder.update_interval == 0) {
            auto [global, objects] = net.encode_memory(frames[t], out.probs);
            state = net.update_memory(state, (int)t, global, objects);
        }
    }
    return res;
}

TrainResult train(const TrainDataset& data, OasisNet& net, const TrainConfig& tcfg,
                  const LossConfig& lcfg, std::ostream* log_stream) {
    for (const auto& seq : data) {
        if (seq.frames.empty() || seq.frames.size() != seq.masks.size())
            throw InputError("train: every sequence needs one mask per frame");
        if (seq.masks[0].object_ids.empty())
            throw InputError("train: first-frame mask has no objects");
    }
    if (tcfg.crop % 16 != 0) throw InputError("train: crop must be divisible by 16");

    auto make_window = [&](Rng& rng, int, std::vector<FrameTensor>& wframes,
                           std::vector<IdMask>& wmasks) {
        const auto& seq = data[(size_t)rng.uniform_int(0, (int)data.size() - 1)];
        const int len = (int)seq.frames.size();
        const int wlen = std::min(tcfg.seq_len, len);
        const int start = len > wlen ? rng.uniform_int(0, len - wlen) : 0;
        const int H = seq.frames[0].height(), W = seq.frames[0].width();
        const int crop = std::min({tcfg.crop, H, W});
        int oy = 0, ox = 0;
        for (int attempt = 0; attempt < 8; ++attempt) {
            oy = H > crop ? rng.uniform_int(0, H - crop) : 0;
            ox = W > crop ? rng.uniform_int(0, W - crop) : 0;
            if (!crop_mask(seq.masks[(size_t)start], oy, ox, crop).object_ids.empty())
                break;
        }
        for (int t = 0; t < wlen; ++t) {
            FrameTensor f = crop == H && crop == W
                                ? seq.frames[(size_t)(start + t)]
                                : crop_frame(seq.frames[(size_t)(start + t)], oy, ox, crop);
            f.frame_index = t;
            wframes.push_back(std::move(f));
            wmasks.push_back(crop == H && crop == W
                                 ? seq.masks[(size_t)(start + t)]
                                 : crop_mask(seq.masks[(size_t)(start + t)], oy, ox, crop));
        }
        if (wmasks[0].object_ids.empty())
            throw std::runtime_error("train: window crop lost all objects");
    };

    const int n_points = lcfg.num_points_main;
    return train_impl(data, net, tcfg, lcfg, log_stream, n_points,
                      /*use_structure=*/net.cfg.enable_structure_decoder,
                      /*edl_enabled=*/true, make_window);
}

TrainResult pretrain_static(const std::vector<ImageMaskPair>& pairs, OasisNet& net,
                            const TrainConfig& tcfg, const LossConfig& lcfg,
                            std::ostream* log_stream) {
    if (pairs.empty()) throw InputError("pretrain_static: no image/mask pairs");
    for (const auto& p : pairs) {
        if (p.mask.h != p.frame.height() || p.mask.w != p.frame.width())
            throw InputError("pretrain_static: mask/image size mismatch");
        if (p.mask.object_ids.empty())
            throw InputError("pretrain_static: pair without objects");
    }

    TrainDataset dummy(1);  // train_impl only touches data via make_window
    dummy[0].frames.resize(1);

    auto make_window = [&](Rng& rng, int, std::vector<FrameTensor>& wframes,
                           std::vector<IdMask>& wmasks) {
        build_pretrain_window(pairs, rng, wframes, wmasks);
    };

    LossConfig pre = lcfg;
    pre.lambda_edl = 0.0;  // uncertainty loss is excluded at this stage
    return train_impl(dummy, net, tcfg, pre, log_stream, lcfg.num_points_pretrain,
                      /*use_structure=*/false, /*edl_enabled=*/false, make_window);
}

void build_pretrain_window(const std::vector<ImageMaskPair>& pairs, Rng& rng,
                           std::vector<FrameTensor>& wframes,
                           std::vector<IdMask>& wmasks) {
    // cut-and-paste composite from two sources
    const auto& base = pairs[(size_t)rng.uniform_int(0, (int)pairs.size() - 1)];
    const auto& extra = pairs[(size_t)rng.uniform_int(0, (int)pairs.size() - 1)];
    FrameTensor composite;
    composite.pixels = base.frame.pixels.clone();
    composite.source_id = "pretrain";
    IdMask cmask = base.mask;
    const int new_id = (base.mask.object_ids.empty() ? 0 : base.mask.object_ids.back()) + 1;
    if (&extra != &base) {
        const int H = composite.height(), W = composite.width();
        const int hw = H * W;
        float* dst = composite.pixels.data();
        const float* src = extra.frame.pixels.data();
        const int dy = rng.uniform_int(-H / 4, H / 4);
        const int dx = rng.uniform_int(-W / 4, W / 4);
        bool pasted = false;
        for (int y = 0; y < extra.mask.h; ++y)
            for (int x = 0; x < extra.mask.w; ++x) {
                if (extra.mask.at(y, x) == 0) continue;
                const int yy = y + dy, xx = x + dx;
                if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
                for (int c = 0; c < 3; ++c)
                    dst[(size_t)c * hw + (size_t)yy * W + xx] =
                        src[(size_t)c * extra.mask.h * extra.mask.w +
                            (size_t)y * extra.mask.w + x];
                cmask.at(yy, xx) = new_id;
                pasted = true;
            }
        if (pasted) cmask.object_ids.push_back(new_id);
    }

    // 3-frame synthesis with growing affine motion; one mirror flag per video
    const bool mirror = rng.uniform() < 0.5;
    const double angle_step = rng.uniform(-8.0, 8.0);
    const double tx_step = rng.uniform(-3.0, 3.0);
    const double ty_step = rng.uniform(-3.0, 3.0);
    const double scale_step = rng.uniform(-0.05, 0.05);
    for (int j = 0; j < 3; ++j) {
        AffineParams params;
        params.mirror = mirror;
        params.angle_deg = angle_step * j;
        params.tx = tx_step * j;
        params.ty = ty_step * j;
        params.scale = 1.0 + scale_step * j;
        FrameTensor f = warp_affine_frame(composite, params);
        f.frame_index = j;
        IdMask m = warp_affine_mask(cmask, params);
        if (j == 0 && m.object_ids.empty()) {
            // degenerate warp; fall back to the untouched composite
            f = composite;
            f.frame_index = 0;
            m = cmask;
        }
        wframes.push_back(std::move(f));
        wmasks.push_back(std::move(m));
    }
}

namespace {
struct Mat23 {
    double a, b, c, d, e, f;  // [x';y'] = [a b; d e][x;y] + [c;f]
};

Mat23 affine_inverse(const AffineParams& p, double cx, double cy) {
    // forward: mirror about the vertical axis, then scale+rotate about the
    // center, then translate
    const double th = p.angle_deg * M_PI / 180.0;
    const double ca = std::cos(th) * p.scale, sa = std::sin(th) * p.scale;
    const double mx = p.mirror ? -1.0 : 1.0;
    // forward matrix M = R*S*Mirror
    const double m00 = ca * mx, m01 = -sa, m10 = sa * mx, m11 = ca;
    const double det = m00 * m11 - m01 * m10;
    const double i00 = m11 / det, i01 = -m01 / det, i10 = -m10 / det, i11 = m00 / det;
    // x' = M(x - c) + c + t  =>  x = Minv(x' - c - t) + c
    Mat23 inv;
    inv.a = i00;
    inv.b = i01;
    inv.d = i10;
    inv.e = i11;
    inv.c = cx - i00 * (cx + p.tx) - i01 * (cy + p.ty);
    inv.f = cy - i10 * (cx + p.tx) - i11 * (cy + p.ty);
    return inv;
}
}  // namespace

FrameTensor warp_affine_frame(const FrameTensor& frame, const AffineParams& params) {
    const int H = frame.height(), W = frame.width();
    const Mat23 inv = affine_inverse(params, (W - 1) / 2.0, (H - 1) / 2.0);
    FrameTensor out;
    out.frame_index = frame.frame_index;
    out.source_id = frame.source_id;
    out.pixels = Tensor::zeros({3, H, W});
    const float* src = frame.pixels.data();
    float* dst = out.pixels.data();
    const int hw = H * W;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const double sx = inv.a * x + inv.b * y + inv.c;
            const double sy = inv.d * x + inv.e * y + inv.f;
            const double cxs = std::clamp(sx, 0.0, (double)(W - 1));
            const double cys = std::clamp(sy, 0.0, (double)(H - 1));
            const int x0 = (int)cxs, y0 = (int)cys;
            const int x1 = std::min(x0 + 1, W - 1), y1 = std::min(y0 + 1, H - 1);
            const double wx = cxs - x0, wy = cys - y0;
            for (int c = 0; c < 3; ++c) {
                const float* ch = src + (size_t)c * hw;
                const double v =
                    (1 - wy) * ((1 - wx) * ch[(size_t)y0 * W + x0] +
                                wx * ch[(size_t)y0 * W + x1]) +
                    wy * ((1 - wx) * ch[(size_t)y1 * W + x0] + wx * ch[(size_t)y1 * W + x1]);
                dst[(size_t)c * hw + (size_t)y * W + x] = (float)v;
            }
        }
    return out;
}

IdMask warp_affine_mask(const IdMask& mask, const AffineParams& params) {
    const int H = mask.h, W = mask.w;
    const Mat23 inv = affine_inverse(params, (W - 1) / 2.0, (H - 1) / 2.0);
    IdMask out;
    out.h = H;
    out.w = W;
    out.labels.assign((size_t)H * W, 0);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const double sx = inv.a * x + inv.b * y + inv.c;
            const double sy = inv.d * x + inv.e * y + inv.f;
            const int nx = (int)std::lround(sx), ny = (int)std::lround(sy);
            if (nx < 0 || nx >= W || ny < 0 || ny >= H) continue;  // background
            out.at(y, x) = mask.at(ny, nx);
        }
    std::vector<int> present;
    for (int id : mask.object_ids)
        if (std::find(out.labels.begin(), out.labels.end(), id) != out.labels.end())
            present.push_back(id);
    out.object_ids = present;
    return out;
}

}  // namespace oasis
