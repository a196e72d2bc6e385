#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>

#include "oasis/model/oasis_net.hpp"
#include "oasis/train/losses.hpp"

#include "json.hpp"

namespace oasis {

struct TrainConfig {
    int64_t total_iters = 2000;
    double base_lr = 1e-4;
    double backbone_lr_scale = 0.1;
    std::vector<double> lr_decay_points = {0.8, 0.92};  // fractions of total_iters
    double lr_decay_factor = 0.1;
    double grad_clip_norm = 3.0;
    int seq_len = 4;
    int crop = 64;
    int batch = 2;
    uint64_t seed = 1;
    double weight_decay = 1e-4;
    int log_interval = 10;

    void validate() const {
        if (total_iters <= 0 || base_lr <= 0 || backbone_lr_scale <= 0 ||
            lr_decay_factor <= 0 || grad_clip_norm <= 0 || seq_len <= 0 || crop <= 0 ||
            batch <= 0)
            throw InputError("TrainConfig: all values must be positive");
        double prev = 0.0;
        for (double f : lr_decay_points) {
            if (!(f > prev && f < 1.0))
                throw InputError("TrainConfig: decay points must be strictly increasing in (0,1)");
            prev = f;
        }
    }
};

enum class ShapeKind { Square, Disk, Triangle };
enum class TextureKind { Flat, Noise, Gradient };

struct SyntheticSceneConfig {
    int canvas = 64;
    int n_objects = 2;  // 1..3
    std::vector<ShapeKind> shapes = {ShapeKind::Square, ShapeKind::Disk,
                                     ShapeKind::Triangle};
    TextureKind texture = TextureKind::Noise;
    int n_frames = 8;
    double min_speed = 1.5;  // pixels/frame
    double max_speed = 3.0;

    void validate() const {
        if (canvas < 16 || canvas % 16 != 0)
            throw InputError("SyntheticSceneConfig: canvas must be >=16 and divisible by 16");
        if (n_objects < 1 || n_objects > 3)
            throw InputError("SyntheticSceneConfig: n_objects must be 1..3");
        if (n_frames < 1) throw InputError("SyntheticSceneConfig: n_frames must be >= 1");
        if (shapes.empty()) throw InputError("SyntheticSceneConfig: shape set is empty");
        if (!(min_speed > 0.0) || max_speed < min_speed)
            throw InputError("SyntheticSceneConfig: bad speed range");
        if (canvas / 3 + 2 >= canvas)
            throw InputError("SyntheticSceneConfig: objects cannot fit the canvas");
    }
};

// Everything a run needs; presets fill defaults, a config file overrides.
struct EngineSettings {
    ModelConfig model;
    TrainConfig train;
    LossConfig loss;
    SyntheticSceneConfig synthetic;
    std::string preset_name = "desk";
};

EngineSettings desk_preset();
EngineSettings paper_preset();
EngineSettings make_preset(const std::string& name);  // "desk" or "paper"

// Key-value text config, one `section.key = value` per line, '#' comments.
// Returns the number of keys applied; conflicting keys win over the preset
// with a warning line on `warnings`.
int apply_config_file(EngineSettings& settings, const std::filesystem::path& path,
                      std::ostream* warnings);
std::map<std::string, std::string> parse_config_text(const std::string& text);
std::string settings_to_config_text(const EngineSettings& settings);

// OASIS_SEED, when set, overrides the configured seed.
void apply_seed_env(EngineSettings& settings);

nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace oasis
