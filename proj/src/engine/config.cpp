#include "oasis/engine/config.hpp"

#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

namespace oasis {
namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    size_t e = s.find_last_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

ShapeKind shape_from_string(const std::string& s) {
    if (s == "square") return ShapeKind::Square;
    if (s == "disk") return ShapeKind::Disk;
    if (s == "triangle") return ShapeKind::Triangle;
    throw InputError("unknown shape: " + s);
}

std::string shape_to_string(ShapeKind k) {
    switch (k) {
        case ShapeKind::Square: return "square";
        case ShapeKind::Disk: return "disk";
        case ShapeKind::Triangle: return "triangle";
    }
    return "square";
}

TextureKind texture_from_string(const std::string& s) {
    if (s == "flat") return TextureKind::Flat;
    if (s == "noise") return TextureKind::Noise;
    if (s == "gradient") return TextureKind::Gradient;
    throw InputError("unknown texture: " + s);
}

std::string texture_to_string(TextureKind k) {
    switch (k) {
        case TextureKind::Flat: return "flat";
        case TextureKind::Noise: return "noise";
        case TextureKind::Gradient: return "gradient";
    }
    return "noise";
}

std::vector<int> ints_from_csv(const std::string& v) {
    std::vector<int> out;
    for (const auto& s : split_csv(v)) out.push_back(std::stoi(s));
    return out;
}

std::vector<double> doubles_from_csv(const std::string& v) {
    std::vector<double> out;
    for (const auto& s : split_csv(v)) out.push_back(std::stod(s));
    return out;
}

template <class T>
std::string csv(const std::vector<T>& v) {
    std::ostringstream os;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) os << ",";
        os << v[i];
    }
    return os.str();
}

bool to_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw InputError("expected boolean, got '" + v + "'");
}

}  // namespace

EngineSettings desk_preset() {
    EngineSettings s;
    s.preset_name = "desk";
    // model defaults in the struct definitions are already desk scale
    s.loss.num_points_pretrain = 2048;  // must fit 64x64 frames
    s.loss.num_points_main = 3072;
    s.loss.anneal_iters = s.train.total_iters / 10;
    return s;
}

EngineSettings paper_preset() {
    EngineSettings s;
    s.preset_name = "paper";
    s.model.image_encoder.channels_per_scale = {64, 128, 256};
    s.model.memory_encoder.global_dim = 256;
    s.model.structure_decoder.hidden_channels = {256, 128, 64};
    s.model.mask_decoder.readout_dim = 256;
    s.model.mask_decoder.decoder_channels = {256, 128, 64};
    s.train.total_iters = 125000;
    s.train.seq_len = 8;
    s.train.crop = 480;
    s.train.batch = 16;
    s.loss.num_points_pretrain = 8192;
    s.loss.num_points_main = 12544;
    s.loss.anneal_iters = s.train.total_iters / 10;
    s.synthetic.canvas = 480;
    return s;
}

EngineSettings make_preset(const std::string& name) {
    if (name == "desk" || name.empty()) return desk_preset();
    if (name == "paper") return paper_preset();
    throw InputError("unknown preset '" + name + "' (expected desk|paper)");
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw InputError("config line " + std::to_string(lineno) +
                             ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw InputError("config line " + std::to_string(lineno) +
                                          ": empty key");
        kv[key] = value;
    }
    return kv;
}

namespace {

// Applies one key; returns the previous value as text for conflict warnings.
std::string apply_key(EngineSettings& s, const std::string& key, const std::string& v) {
    auto prev = [&](auto cur) { return (std::ostringstream() << cur).str(); };
    std::string old;

    if (key == "model.image_encoder.channels") {
        old = csv(s.model.image_encoder.channels_per_scale);
        s.model.image_encoder.channels_per_scale = ints_from_csv(v);
    } else if (key == "model.image_encoder.pretrained") {
        old = prev(s.model.image_encoder.pretrained);
        s.model.image_encoder.pretrained = to_bool(v);
    } else if (key == "model.memory_encoder.object_dim") {
        old = prev(s.model.memory_encoder.object_dim);
        s.model.memory_encoder.object_dim = std::stoi(v);
    } else if (key == "model.memory_encoder.object_grid") {
        old = prev(s.model.memory_encoder.object_grid);
        s.model.memory_encoder.object_grid = std::stoi(v);
    } else if (key == "model.memory_encoder.global_dim") {
        old = prev(s.model.memory_encoder.global_dim);
        s.model.memory_encoder.global_dim = std::stoi(v);
    } else if (key == "model.memory_encoder.capacity") {
        old = prev(s.model.memory_encoder.capacity);
        s.model.memory_encoder.capacity = std::stoi(v);
    } else if (key == "model.memory_encoder.update_interval") {
        old = prev(s.model.memory_encoder.update_interval);
        s.model.memory_encoder.update_interval = std::stoi(v);
    } else if (key == "model.structure_decoder.hidden_channels") {
        old = csv(s.model.structure_decoder.hidden_channels);
        s.model.structure_decoder.hidden_channels = ints_from_csv(v);
    } else if (key == "model.structure_decoder.activation_slope") {
        old = prev(s.model.structure_decoder.activation_slope);
        s.model.structure_decoder.activation_slope = std::stof(v);
    } else if (key == "model.structure_decoder.use_object_fusion") {
        old = prev(s.model.structure_decoder.use_object_fusion);
        s.model.structure_decoder.use_object_fusion = to_bool(v);
    } else if (key == "model.mask_decoder.readout_dim") {
        old = prev(s.model.mask_decoder.readout_dim);
        s.model.mask_decoder.readout_dim = std::stoi(v);
    } else if (key == "model.mask_decoder.num_readout_heads") {
        old = prev(s.model.mask_decoder.num_readout_heads);
        s.model.mask_decoder.num_readout_heads = std::stoi(v);
    } else if (key == "model.mask_decoder.decoder_channels") {
        old = csv(s.model.mask_decoder.decoder_channels);
        s.model.mask_decoder.decoder_channels = ints_from_csv(v);
    } else if (key == "model.canny.low_threshold") {
        old = prev(s.model.canny.low_threshold);
        s.model.canny.low_threshold = std::stod(v);
    } else if (key == "model.canny.high_threshold") {
        old = prev(s.model.canny.high_threshold);
        s.model.canny.high_threshold = std::stod(v);
    } else if (key == "model.canny.gaussian_sigma") {
        old = prev(s.model.canny.gaussian_sigma);
        s.model.canny.gaussian_sigma = std::stod(v);
    } else if (key == "model.canny.l2_gradient") {
        old = prev(s.model.canny.l2_gradient);
        s.model.canny.l2_gradient = to_bool(v);
    } else if (key == "model.fusion.epsilon") {
        old = prev(s.model.fusion.epsilon);
        s.model.fusion.epsilon = std::stof(v);
    } else if (key == "model.fusion.beta") {
        old = prev(s.model.fusion.beta);
        s.model.fusion.beta = std::stof(v);
    } else if (key == "model.enable_structure_decoder") {
        old = prev(s.model.enable_structure_decoder);
        s.model.enable_structure_decoder = to_bool(v);
    } else if (key == "train.total_iters") {
        old = prev(s.train.total_iters);
        s.train.total_iters = std::stoll(v);
    } else if (key == "train.base_lr") {
        old = prev(s.train.base_lr);
        s.train.base_lr = std::stod(v);
    } else if (key == "train.backbone_lr_scale") {
        old = prev(s.train.backbone_lr_scale);
        s.train.backbone_lr_scale = std::stod(v);
    } else if (key == "train.lr_decay_points") {
        old = csv(s.train.lr_decay_points);
        s.train.lr_decay_points = doubles_from_csv(v);
    } else if (key == "train.lr_decay_factor") {
        old = prev(s.train.lr_decay_factor);
        s.train.lr_decay_factor = std::stod(v);
    } else if (key == "train.grad_clip_norm") {
        old = prev(s.train.grad_clip_norm);
        s.train.grad_clip_norm = std::stod(v);
    } else if (key == "train.seq_len") {
        old = prev(s.train.seq_len);
        s.train.seq_len = std::stoi(v);
    } else if (key == "train.crop") {
        old = prev(s.train.crop);
        s.train.crop = std::stoi(v);
    } else if (key == "train.batch") {
        old = prev(s.train.batch);
        s.train.batch = std::stoi(v);
    } else if (key == "train.seed") {
        old = prev(s.train.seed);
        s.train.seed = (uint64_t)std::stoull(v);
    } else if (key == "train.weight_decay") {
        old = prev(s.train.weight_decay);
        s.train.weight_decay = std::stod(v);
    } else if (key == "train.log_interval") {
        old = prev(s.train.log_interval);
        s.train.log_interval = std::stoi(v);
    } else if (key == "loss.lambda_edl") {
        old = prev(s.loss.lambda_edl);
        s.loss.lambda_edl = std::stod(v);
    } else if (key == "loss.anneal_iters") {
        old = prev(s.loss.anneal_iters);
        s.loss.anneal_iters = std::stoll(v);
    } else if (key == "loss.num_points_pretrain") {
        old = prev(s.loss.num_points_pretrain);
        s.loss.num_points_pretrain = std::stoi(v);
    } else if (key == "loss.num_points_main") {
        old = prev(s.loss.num_points_main);
        s.loss.num_points_main = std::stoi(v);
    } else if (key == "loss.dice_smooth") {
        old = prev(s.loss.dice_smooth);
        s.loss.dice_smooth = std::stod(v);
    } else if (key == "synthetic.canvas") {
        old = prev(s.synthetic.canvas);
        s.synthetic.canvas = std::stoi(v);
    } else if (key == "synthetic.n_objects") {
        old = prev(s.synthetic.n_objects);
        s.synthetic.n_objects = std::stoi(v);
    } else if (key == "synthetic.shapes") {
        std::vector<std::string> olds;
        for (auto k : s.synthetic.shapes) olds.push_back(shape_to_string(k));
        old = csv(olds);
        s.synthetic.shapes.clear();
        for (const auto& name : split_csv(v))
            s.synthetic.shapes.push_back(shape_from_string(name));
    } else if (key == "synthetic.texture") {
        old = texture_to_string(s.synthetic.texture);
        s.synthetic.texture = texture_from_string(v);
    } else if (key == "synthetic.n_frames") {
        old = prev(s.synthetic.n_frames);
        s.synthetic.n_frames = std::stoi(v);
    } else if (key == "synthetic.min_speed") {
        old = prev(s.synthetic.min_speed);
        s.synthetic.min_speed = std::stod(v);
    } else if (key == "synthetic.max_speed") {
        old = prev(s.synthetic.max_speed);
        s.synthetic.max_speed = std::stod(v);
    } else {
        throw InputError("unknown config key: " + key);
    }
    return old;
}

}  // namespace

int apply_config_file(EngineSettings& settings, const std::filesystem::path& path,
                      std::ostream* warnings) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    const auto kv = parse_config_text(buf.str());
    int applied = 0;
    for (const auto& [key, value] : kv) {
        const std::string old = apply_key(settings, key, value);
        ++applied;
        if (warnings && old != value)
            *warnings << "warning: config overrides preset '" << settings.preset_name
                      << "' for " << key << " (" << old << " -> " << value << ")\n";
    }
    return applied;
}

std::string settings_to_config_text(const EngineSettings& s) {
    std::ostringstream os;
    os << "# oasis run configuration (preset: " << s.preset_name << ")\n";
    os << "model.image_encoder.channels = " << csv(s.model.image_encoder.channels_per_scale) << "\n";
    os << "model.image_encoder.pretrained = " << (s.model.image_encoder.pretrained ? "true" : "false") << "\n";
    os << "model.memory_encoder.object_dim = " << s.model.memory_encoder.object_dim << "\n";
    os << "model.memory_encoder.object_grid = " << s.model.memory_encoder.object_grid << "\n";
    os << "model.memory_encoder.global_dim = " << s.model.memory_encoder.global_dim << "\n";
    os << "model.memory_encoder.capacity = " << s.model.memory_encoder.capacity << "\n";
    os << "model.memory_encoder.update_interval = " << s.model.memory_encoder.update_interval << "\n";
    os << "model.structure_decoder.hidden_channels = " << csv(s.model.structure_decoder.hidden_channels) << "\n";
    os << "model.structure_decoder.activation_slope = " << s.model.structure_decoder.activation_slope << "\n";
    os << "model.structure_decoder.use_object_fusion = " << (s.model.structure_decoder.use_object_fusion ? "true" : "false") << "\n";
    os << "model.mask_decoder.readout_dim = " << s.model.mask_decoder.readout_dim << "\n";
    os << "model.mask_decoder.num_readout_heads = " << s.model.mask_decoder.num_readout_heads << "\n";
    os << "model.mask_decoder.decoder_channels = " << csv(s.model.mask_decoder.decoder_channels) << "\n";
    os << "model.canny.low_threshold = " << s.model.canny.low_threshold << "\n";
    os << "model.canny.high_threshold = " << s.model.canny.high_threshold << "\n";
    os << "model.canny.gaussian_sigma = " << s.model.canny.gaussian_sigma << "\n";
    os << "model.canny.l2_gradient = " << (s.model.canny.l2_gradient ? "true" : "false") << "\n";
    os << "model.fusion.epsilon = " << s.model.fusion.epsilon << "\n";
    os << "model.fusion.beta = " << s.model.fusion.beta << "\n";
    os << "model.enable_structure_decoder = " << (s.model.enable_structure_decoder ? "true" : "false") << "\n";
    os << "train.total_iters = " << s.train.total_iters << "\n";
    os << "train.base_lr = " << s.train.base_lr << "\n";
    os << "train.backbone_lr_scale = " << s.train.backbone_lr_scale << "\n";
    os << "train.lr_decay_points = " << csv(s.train.lr_decay_points) << "\n";
    os << "train.lr_decay_factor = " << s.train.lr_decay_factor << "\n";
    os << "train.grad_clip_norm = " << s.train.grad_clip_norm << "\n";
    os << "train.seq_len = " << s.train.seq_len << "\n";
    os << "train.crop = " << s.train.crop << "\n";
    os << "train.batch = " << s.train.batch << "\n";
    os << "train.seed = " << s.train.seed << "\n";
    os << "train.weight_decay = " << s.train.weight_decay << "\n";
    os << "train.log_interval = " << s.train.log_interval << "\n";
    os << "loss.lambda_edl = " << s.loss.lambda_edl << "\n";
    os << "loss.anneal_iters = " << s.loss.anneal_iters << "\n";
    os << "loss.num_points_pretrain = " << s.loss.num_points_pretrain << "\n";
    os << "loss.num_points_main = " << s.loss.num_points_main << "\n";
    os << "loss.dice_smooth = " << s.loss.dice_smooth << "\n";
    os << "synthetic.canvas = " << s.synthetic.canvas << "\n";
    os << "synthetic.n_objects = " << s.synthetic.n_objects << "\n";
    {
        std::vector<std::string> names;
        for (auto k : s.synthetic.shapes) names.push_back(shape_to_string(k));
        os << "synthetic.shapes = " << csv(names) << "\n";
    }
    os << "synthetic.texture = " << texture_to_string(s.synthetic.texture) << "\n";
    os << "synthetic.n_frames = " << s.synthetic.n_frames << "\n";
    os << "synthetic.min_speed = " << s.synthetic.min_speed << "\n";
    os << "synthetic.max_speed = " << s.synthetic.max_speed << "\n";
    return os.str();
}

void apply_seed_env(EngineSettings& settings) {
    const char* env = std::getenv("OASIS_SEED");
    if (env && *env) settings.train.seed = (uint64_t)std::strtoull(env, nullptr, 10);
}

nlohmann::json model_config_to_json(const ModelConfig& cfg) {
    nlohmann::json j;
    j["image_encoder"] = {{"channels_per_scale", cfg.image_encoder.channels_per_scale},
                          {"pretrained", cfg.image_encoder.pretrained}};
    j["memory_encoder"] = {{"object_dim", cfg.memory_encoder.object_dim},
                           {"object_grid", cfg.memory_encoder.object_grid},
                           {"global_dim", cfg.memory_encoder.global_dim},
                           {"capacity", cfg.memory_encoder.capacity},
                           {"update_interval", cfg.memory_encoder.update_interval}};
    j["structure_decoder"] = {{"hidden_channels", cfg.structure_decoder.hidden_channels},
                              {"activation_slope", cfg.structure_decoder.activation_slope},
                              {"use_object_fusion", cfg.structure_decoder.use_object_fusion}};
    j["mask_decoder"] = {{"readout_dim", cfg.mask_decoder.readout_dim},
                         {"num_readout_heads", cfg.mask_decoder.num_readout_heads},
                         {"decoder_channels", cfg.mask_decoder.decoder_channels}};
    j["canny"] = {{"low_threshold", cfg.canny.low_threshold},
                  {"high_threshold", cfg.canny.high_threshold},
                  {"gaussian_sigma", cfg.canny.gaussian_sigma},
                  {"l2_gradient", cfg.canny.l2_gradient}};
    j["fusion"] = {{"epsilon", cfg.fusion.epsilon}, {"beta", cfg.fusion.beta}};
    j["enable_structure_decoder"] = cfg.enable_structure_decoder;
    return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    const auto& ie = j.at("image_encoder");
    cfg.image_encoder.channels_per_scale = ie.at("channels_per_scale").get<std::vector<int>>();
    cfg.image_encoder.pretrained = ie.at("pretrained").get<bool>();
    const auto& me = j.at("memory_encoder");
    cfg.memory_encoder.object_dim = me.at("object_dim").get<int>();
    cfg.memory_encoder.object_grid = me.at("object_grid").get<int>();
    cfg.memory_encoder.global_dim = me.at("global_dim").get<int>();
    cfg.memory_encoder.capacity = me.at("capacity").get<int>();
    cfg.memory_encoder.update_interval = me.at("update_interval").get<int>();
    const auto& sd = j.at("structure_decoder");
    cfg.structure_decoder.hidden_channels = sd.at("hidden_channels").get<std::vector<int>>();
    cfg.structure_decoder.activation_slope = sd.at("activation_slope").get<float>();
    cfg.structure_decoder.use_object_fusion = sd.at("use_object_fusion").get<bool>();
    const auto& md = j.at("mask_decoder");
    cfg.mask_decoder.readout_dim = md.at("readout_dim").get<int>();
    cfg.mask_decoder.num_readout_heads = md.at("num_readout_heads").get<int>();
    cfg.mask_decoder.decoder_channels = md.at("decoder_channels").get<std::vector<int>>();
    const auto& ca = j.at("canny");
    cfg.canny.low_threshold = ca.at("low_threshold").get<double>();
    cfg.canny.high_threshold = ca.at("high_threshold").get<double>();
    cfg.canny.gaussian_sigma = ca.at("gaussian_sigma").get<double>();
    cfg.canny.l2_gradient = ca.at("l2_gradient").get<bool>();
    cfg.fusion.epsilon = j.at("fusion").at("epsilon").get<float>();
    cfg.fusion.beta = j.at("fusion").at("beta").get<float>();
    cfg.enable_structure_decoder = j.at("enable_structure_decoder").get<bool>();
    return cfg;
}

}  // namespace oasis
