#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "oasis/engine/engine.hpp"
#include "oasis/engine/synthetic.hpp"
#include "oasis/eval/metrics.hpp"
#include "oasis/io/checkpoint.hpp"
#include "oasis/io/dataset.hpp"
#include "oasis/io/png_io.hpp"
#include "oasis/kern/kernels.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace oasis;

namespace {

struct CommonOpts {
    std::string config;
    std::string preset = "desk";
    std::string out;
    std::string device = "auto";
    int64_t seed = -1;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool out_required) {
    cmd->add_option("--config", opts.config, "key-value config file");
    cmd->add_option("--preset", opts.preset, "configuration preset (desk|paper)")
        ->check(CLI::IsMember({"desk", "paper"}));
    auto* out = cmd->add_option("--out", opts.out, "output directory");
    if (out_required) out->required();
    cmd->add_option("--seed", opts.seed, "RNG seed (overrides config)");
    cmd->add_option("--device", opts.device,
                    "compute backend: auto|cpu|scalar|avx2 (cpu == auto)");
}

EngineSettings load_settings(const CommonOpts& opts) {
    EngineSettings s = make_preset(opts.preset);
    if (!opts.config.empty()) apply_config_file(s, opts.config, &std::cerr);
    if (opts.seed >= 0) s.train.seed = (uint64_t)opts.seed;
    apply_seed_env(s);  // OASIS_SEED has the last word
    if (opts.device == "auto" || opts.device == "cpu")
        kern::select_backend("auto");
    else
        kern::select_backend(opts.device);
    return s;
}

void print_summary(const json& j) { std::cout << j.dump() << std::endl; }

void ensure_out(const std::string& out) {
    if (out.empty()) throw InputError("--out directory is required");
    fs::create_directories(out);
}

TrainDataset load_train_dataset(const std::string& data_root) {
    DatasetLayout layout = DatasetLayout::at(data_root);
    TrainDataset ds;
    for (const auto& name : layout.sequences()) {
        LoadedSequence seq = load_sequence(layout, name);
        SequenceSample sample;
        for (size_t i = 0; i < seq.frames.size(); ++i) {
            if (!seq.masks[i].has_value())
                throw InputError("training sequence '" + name +
                                 "' is missing the annotation for frame " +
                                 seq.frame_names[i]);
            sample.frames.push_back(seq.frames[i]);
            sample.masks.push_back(*seq.masks[i]);
        }
        ds.push_back(std::move(sample));
    }
    if (ds.empty()) throw InputError("no sequences found under " + data_root);
    return ds;
}

std::vector<std::string> pick_sequences(const DatasetLayout& layout,
                                        const std::vector<std::string>& requested) {
    if (requested.empty()) return layout.sequences();
    return requested;
}

json eval_dataset(const DatasetLayout& layout, const fs::path& pred_root,
                  const std::vector<std::string>& seqs, const fs::path& csv_path) {
    std::ofstream csv(csv_path);
    csv << "sequence,object_id,J,F,JF\n";
    double sum_jf = 0.0, sum_j = 0.0, sum_f = 0.0;
    int n = 0;
    for (const auto& name : seqs) {
        LoadedSequence seq = load_sequence(layout, name);
        std::vector<IdMask> gts, preds;
        for (size_t i = 0; i < seq.frames.size(); ++i) {
            if (!seq.masks[i].has_value())
                throw InputError("eval: sequence '" + name + "' lacks GT for frame " +
                                 seq.frame_names[i]);
            gts.push_back(*seq.masks[i]);
            const fs::path p = pred_root / name / (seq.frame_names[i] + ".png");
            if (!fs::exists(p))
                throw InputError("eval: missing prediction " + p.string());
            preds.push_back(read_palette_mask(p));
        }
        SequenceResult r = evaluate_sequence(preds, gts);
        for (size_t k = 0; k < r.object_ids.size(); ++k)
            csv << name << "," << r.object_ids[k] << "," << r.per_object_J[k] << ","
                << r.per_object_F[k] << ","
                << 0.5 * (r.per_object_J[k] + r.per_object_F[k]) << "\n";
        sum_jf += r.JF;
        sum_j += r.mean_J();
        sum_f += r.mean_F();
        ++n;
    }
    json summary;
    summary["JF"] = sum_jf / n;
    summary["J"] = sum_j / n;
    summary["F"] = sum_f / n;
    summary["G"] = sum_jf / n;  // mean of J&F across sequences at desk scale
    summary["sequences"] = n;
    return summary;
}

int run_gen(const CommonOpts& opts, int sequences) {
    EngineSettings s = load_settings(opts);
    ensure_out(opts.out);
    const auto names = generate_synthetic(s.synthetic, sequences, s.train.seed, opts.out);
    json j;
    j["command"] = "gen";
    j["out"] = opts.out;
    j["sequences"] = names;
    j["seed"] = s.train.seed;
    print_summary(j);
    return 0;
}

int run_train(const CommonOpts& opts, const std::string& data, const std::string& init,
              bool pretrain_mode) {
    EngineSettings s = load_settings(opts);
    ensure_out(opts.out);

    std::unique_ptr<OasisNet> net;
    if (!init.empty()) {
        net = load_checkpoint(init).net;
    } else {
        net = std::make_unique<OasisNet>(s.model, s.train.seed);
    }

    std::ofstream log(fs::path(opts.out) / "train_log.jsonl");
    TrainResult result;
    if (pretrain_mode) {
        TrainDataset ds = load_train_dataset(data);
        std::vector<ImageMaskPair> pairs;
        for (const auto& seq : ds)
            for (size_t i = 0; i < seq.frames.size(); ++i)
                pairs.push_back({seq.frames[i], seq.masks[i]});
        result = pretrain_static(pairs, *net, s.train, s.loss, &log);
    } else {
        TrainDataset ds = load_train_dataset(data);
        result = train(ds, *net, s.train, s.loss, &log);
    }

    const fs::path ckpt = fs::path(opts.out) / "model.ckpt";
    json meta;
    meta["stage"] = pretrain_mode ? "pretrain" : "train";
    meta["iters"] = s.train.total_iters;
    meta["seed"] = s.train.seed;
    save_checkpoint(ckpt, *net, meta);
    {
        std::ofstream cfg_out(fs::path(opts.out) / "run_config.txt");
        cfg_out << settings_to_config_text(s);
    }

    json j;
    j["command"] = pretrain_mode ? "pretrain" : "train";
    j["checkpoint"] = ckpt.string();
    j["iters"] = s.train.total_iters;
    j["final_loss"] = result.log.empty() ? 0.0 : result.log.back().total;
    j["log"] = (fs::path(opts.out) / "train_log.jsonl").string();
    print_summary(j);
    return 0;
}

int run_infer(const CommonOpts& opts, const std::string& data, const std::string& ckpt,
              const std::vector<std::string>& sequences, bool save_structure) {
    EngineSettings s = load_settings(opts);
    ensure_out(opts.out);
    auto loaded = load_checkpoint(ckpt);
    DatasetLayout layout = DatasetLayout::at(data);
    json done = json::array();
    for (const auto& name : pick_sequences(layout, sequences)) {
        LoadedSequence seq = load_sequence(layout, name);
        PropagateResult res =
            propagate_video(seq.frames, *seq.masks[0], *loaded.net, save_structure);
        save_predictions(res.masks, opts.out, name, seq.frame_names);
        if (save_structure) {
            const fs::path sdir = fs::path(opts.out) / name / "structure";
            fs::create_directories(sdir);
            for (size_t t = 0; t < res.structures.size(); ++t) {
                if (!res.structures[t].has_value()) continue;
                NoGradGuard ng;
                write_gray_png(sdir / (seq.frame_names[t] + ".png"),
                               sigmoid(res.structures[t]->values));
            }
        }
        done.push_back(name);
    }
    json j;
    j["command"] = "infer";
    j["out"] = opts.out;
    j["sequences"] = done;
    print_summary(j);
    return 0;
}

int run_eval(const CommonOpts& opts, const std::string& data, const std::string& pred,
             const std::string& split) {
    load_settings(opts);
    ensure_out(opts.out);
    DatasetLayout layout = DatasetLayout::at(
        data, split.empty() ? std::optional<fs::path>{} : std::optional<fs::path>{split});
    const fs::path csv = fs::path(opts.out) / "per_sequence.csv";
    json summary = eval_dataset(layout, pred, layout.sequences(), csv);
    summary["command"] = "eval";
    summary["csv"] = csv.string();
    {
        std::ofstream jf(fs::path(opts.out) / "summary.json");
        jf << summary.dump(2) << "\n";
    }
    print_summary(summary);
    return 0;
}

int run_bench(const CommonOpts& opts, const std::string& data, const std::string& ckpt,
              const std::string& sequence, int warmup, int timed) {
    load_settings(opts);
    auto loaded = load_checkpoint(ckpt);
    DatasetLayout layout = DatasetLayout::at(data);
    const auto seqs = layout.sequences();
    const std::string name = sequence.empty() ? seqs.at(0) : sequence;
    LoadedSequence seq = load_sequence(layout, name);

    // single-stream propagation including memory updates
    const OasisNet& net = *loaded.net;
    const std::vector<int> ids = seq.masks[0]->object_ids;
    NoGradGuard no_grad;
    MemoryState state;
    {
        ProbMask p0 = prob_mask_from_id_mask(*seq.masks[0]);
        auto [g, o] = net.encode_memory(seq.frames[0], p0);
        state = net.update_memory(state, 0, g, o);
    }
    int frame_counter = 0;
    auto process = [&](const FrameTensor& f) {
        ++frame_counter;
        FrameOutput out = net.forward_frame(f, state, ids);
        if (frame_counter % net.cfg.memory_encoder.update_interval == 0) {
            auto [g, o] = net.encode_memory(f, out.probs);
            state = net.update_memory(state, frame_counter, g, o);
        }
    };
    std::vector<FrameTensor> video(seq.frames.begin() + 1, seq.frames.end());
    while ((int)video.size() < warmup + timed)  // loop the clip if it is short
        video.insert(video.end(), seq.frames.begin() + 1, seq.frames.end());
    FpsResult r = fps_benchmark(process, video, warmup, timed);

    json j;
    j["command"] = "bench";
    j["sequence"] = name;
    j["fps"] = r.fps;
    j["timed_frames"] = r.timed_frames;
    j["elapsed_seconds"] = r.elapsed_seconds;
    j["hardware"] = r.hardware;
    print_summary(j);
    return 0;
}

int run_viz(const CommonOpts& opts, const std::string& data, const std::string& ckpt,
            const std::vector<std::string>& sequences) {
    load_settings(opts);
    ensure_out(opts.out);
    auto loaded = load_checkpoint(ckpt);
    DatasetLayout layout = DatasetLayout::at(data);
    json done = json::array();
    for (const auto& name : pick_sequences(layout, sequences)) {
        LoadedSequence seq = load_sequence(layout, name);
        PropagateResult res = propagate_video(seq.frames, *seq.masks[0], *loaded.net,
                                              /*want_structures=*/true);
        const fs::path dir = fs::path(opts.out) / name;
        fs::create_directories(dir);
        NoGradGuard ng;
        const auto& palette = davis_palette();
        for (size_t t = 0; t < seq.frames.size(); ++t) {
            const std::string stem = seq.frame_names[t];
            write_image_rgb(dir / (stem + "_frame.png"), seq.frames[t].pixels);
            // mask overlay at half opacity
            Tensor overlay = seq.frames[t].pixels.clone();
            const int H = seq.frames[t].height(), W = seq.frames[t].width();
            float* px = overlay.data();
            const int hw = H * W;
            for (int i = 0; i < hw; ++i) {
                const int32_t id = res.masks[t].labels[(size_t)i];
                if (id == 0) continue;
                for (int c = 0; c < 3; ++c)
                    px[(size_t)c * hw + i] = 0.5f * px[(size_t)c * hw + i] +
                                             0.5f * (float)palette[(size_t)id][(size_t)c] / 255.0f;
            }
            write_image_rgb(dir / (stem + "_mask.png"), overlay);
            EdgeMap em = canny(seq.frames[t], loaded.net->cfg.canny);
            write_gray_png(dir / (stem + "_edges.png"), em.values);
            if (res.structures[t].has_value())
                write_gray_png(dir / (stem + "_structure.png"),
                               sigmoid(res.structures[t]->values));
        }
        done.push_back(name);
    }
    json j;
    j["command"] = "viz";
    j["out"] = opts.out;
    j["sequences"] = done;
    print_summary(j);
    return 0;
}

int run_sweep(const CommonOpts& opts, const std::string& data, const std::string& ckpt,
              std::vector<double> epsilons, std::vector<double> betas) {
    load_settings(opts);
    ensure_out(opts.out);
    auto loaded = load_checkpoint(ckpt);
    DatasetLayout layout = DatasetLayout::at(data);
    const auto seqs = layout.sequences();
    if (epsilons.empty()) epsilons = {loaded.net->cfg.fusion.epsilon};
    if (betas.empty()) betas = {loaded.net->cfg.fusion.beta};

    const fs::path csv_path = fs::path(opts.out) / "sweep.csv";
    std::ofstream csv(csv_path);
    csv << "epsilon,beta,JF,J,F\n";
    int rows = 0;
    for (double eps : epsilons)
        for (double beta : betas) {
            loaded.net->cfg.fusion.epsilon = (float)eps;
            loaded.net->cfg.fusion.beta = (float)beta;
            double sum_jf = 0.0, sum_j = 0.0, sum_f = 0.0;
            for (const auto& name : seqs) {
                LoadedSequence seq = load_sequence(layout, name);
                std::vector<IdMask> gts;
                for (const auto& m : seq.masks) {
                    if (!m.has_value())
                        throw InputError("sweep: sequence '" + name + "' lacks dense GT");
                    gts.push_back(*m);
                }
                PropagateResult res = propagate_video(seq.frames, gts[0], *loaded.net);
                SequenceResult r = evaluate_sequence(res.masks, gts);
                sum_jf += r.JF;
                sum_j += r.mean_J();
                sum_f += r.mean_F();
            }
            csv << eps << "," << beta << "," << sum_jf / (double)seqs.size() << ","
                << sum_j / (double)seqs.size() << "," << sum_f / (double)seqs.size()
                << "\n";
            ++rows;
        }
    json j;
    j["command"] = "sweep";
    j["csv"] = csv_path.string();
    j["rows"] = rows;
    print_summary(j);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"OASIS: structure-refined memory-based video object segmentation"};
    app.require_subcommand(1);

    CommonOpts gen_o, pre_o, train_o, infer_o, eval_o, bench_o, viz_o, sweep_o;
    int gen_sequences = 1;
    std::string data, init_ckpt, ckpt, split, sequence;
    std::vector<std::string> sequences;
    bool save_structure = false;
    int warmup = 2, timed = 10;
    std::vector<double> sweep_eps, sweep_beta;

    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
    add_common(gen, gen_o, /*out_required=*/true);
    gen->add_option("--sequences", gen_sequences, "number of sequences")->default_val(1);

    auto* pretrain = app.add_subcommand("pretrain", "static-image pretraining stage");
    add_common(pretrain, pre_o, true);
    pretrain->add_option("--data", data, "dataset root (DAVIS layout)")->required();
    pretrain->add_option("--init", init_ckpt, "initial checkpoint");

    auto* train_cmd = app.add_subcommand("train", "main training stage");
    add_common(train_cmd, train_o, true);
    train_cmd->add_option("--data", data, "dataset root (DAVIS layout)")->required();
    train_cmd->add_option("--init", init_ckpt, "initial checkpoint (e.g. pretrained)");

    auto* infer = app.add_subcommand("infer", "propagate first-frame masks");
    add_common(infer, infer_o, true);
    infer->add_option("--data", data, "dataset root")->required();
    infer->add_option("--ckpt", ckpt, "model checkpoint")->required();
    infer->add_option("--sequence", sequences, "sequence name (repeatable; default all)");
    infer->add_flag("--save-structure", save_structure, "also write structure maps");

    auto* eval_cmd = app.add_subcommand("eval", "score predictions against ground truth");
    add_common(eval_cmd, eval_o, true);
    eval_cmd->add_option("--data", data, "dataset root with ground truth")->required();
    eval_cmd->add_option("--pred", ckpt, "directory of predicted masks")->required();
    eval_cmd->add_option("--split", split, "file listing sequences to evaluate");

    auto* bench = app.add_subcommand("bench", "frames-per-second benchmark");
    add_common(bench, bench_o, false);
    bench->add_option("--data", data, "dataset root")->required();
    bench->add_option("--ckpt", ckpt, "model checkpoint")->required();
    bench->add_option("--sequence", sequence, "sequence to run (default: first)");
    bench->add_option("--warmup", warmup, "warmup frames")->default_val(2);
    bench->add_option("--frames", timed, "timed frames")->default_val(10);

    auto* viz = app.add_subcommand("viz", "write frame/mask/structure/edge panels");
    add_common(viz, viz_o, true);
    viz->add_option("--data", data, "dataset root")->required();
    viz->add_option("--ckpt", ckpt, "model checkpoint")->required();
    viz->add_option("--sequence", sequences, "sequence name (repeatable; default all)");

    auto* sweep = app.add_subcommand("sweep", "grid over fusion factors, CSV output");
    add_common(sweep, sweep_o, true);
    sweep->add_option("--data", data, "dataset root with dense GT")->required();
    sweep->add_option("--ckpt", ckpt, "model checkpoint")->required();
    sweep->add_option("--epsilon", sweep_eps, "edge factor values")->delimiter(',');
    sweep->add_option("--beta", sweep_beta, "structure factor values")->delimiter(',');

    try {
        app.parse(argc, argv);
        if (gen->parsed()) return run_gen(gen_o, gen_sequences);
        if (pretrain->parsed()) return run_train(pre_o, data, init_ckpt, true);
        if (train_cmd->parsed()) return run_train(train_o, data, init_ckpt, false);
        if (infer->parsed())
            return run_infer(infer_o, data, ckpt, sequences, save_structure);
        if (eval_cmd->parsed()) return run_eval(eval_o, data, ckpt, split);
        if (bench->parsed())
            return run_bench(bench_o, data, ckpt, sequence, warmup, timed);
        if (viz->parsed()) return run_viz(viz_o, data, ckpt, sequences);
        if (sweep->parsed())
            return run_sweep(sweep_o, data, ckpt, sweep_eps, sweep_beta);
        throw InputError("no subcommand given");
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;  // bad flags are input errors
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << std::endl;
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << std::endl;
        return 2;
    }
}
