#include "config/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "core/error.hpp"

namespace mvb::config {

namespace {

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& v, const std::string& where) {
    try {
        size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        fail_config("config: key '" + where + "' expects a number, got '" + v + "'");
    }
}

std::int64_t parse_int(const std::string& v, const std::string& where) {
    try {
        size_t used = 0;
        const std::int64_t x = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        fail_config("config: key '" + where + "' expects an integer, got '" + v + "'");
    }
}

std::uint64_t parse_u64(const std::string& v, const std::string& where) {
    try {
        size_t used = 0;
        const std::uint64_t x = std::stoull(v, &used);
        if (used != v.size() || (!v.empty() && v[0] == '-')) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        fail_config("config: key '" + where + "' expects an unsigned integer, got '" + v + "'");
    }
}

std::vector<double> parse_double_list(const std::string& v, const std::string& where) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) fail_config("config: key '" + where + "' has an empty list entry");
        out.push_back(parse_double(item, where));
    }
    if (out.empty()) fail_config("config: key '" + where + "' expects a non-empty list");
    return out;
}

std::string join_doubles(const std::vector<double>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += fmt_double(v[i]);
    }
    return out;
}

struct KeySpec {
    std::string section;
    std::string key;
    std::function<void(MvbConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const MvbConfig&)> get;
};

std::vector<KeySpec> key_table() {
    auto dbl = [](double MvbConfig::* f) {
        return KeySpec{"", "",
                       [f](MvbConfig& c, const std::string& v, const std::string& w) {
                           c.*f = parse_double(v, w);
                       },
                       [f](const MvbConfig& c) { return fmt_double(c.*f); }};
    };
    auto num = [](int MvbConfig::* f) {
        return KeySpec{"", "",
                       [f](MvbConfig& c, const std::string& v, const std::string& w) {
                           c.*f = static_cast<int>(parse_int(v, w));
                       },
                       [f](const MvbConfig& c) { return std::to_string(c.*f); }};
    };
    auto u64 = [](std::uint64_t MvbConfig::* f) {
        return KeySpec{"", "",
                       [f](MvbConfig& c, const std::string& v, const std::string& w) {
                           c.*f = parse_u64(v, w);
                       },
                       [f](const MvbConfig& c) { return std::to_string(c.*f); }};
    };

    std::vector<KeySpec> t;
    auto add = [&t](const char* section, const char* key, KeySpec spec) {
        spec.section = section;
        spec.key = key;
        t.push_back(std::move(spec));
    };

    add("core", "resolution", num(&MvbConfig::resolution));
    add("core", "rig_extent", dbl(&MvbConfig::rig_extent));

    add("scenes", "count", num(&MvbConfig::scene_count));
    add("scenes", "primitives", num(&MvbConfig::primitives));
    add("scenes", "palette",
        {"", "",
         [](MvbConfig& c, const std::string& v, const std::string&) { c.palette = v; },
         [](const MvbConfig& c) { return c.palette; }});
    add("scenes", "seed", u64(&MvbConfig::scenes_seed));

    add("schedule", "kind",
        {"", "",
         [](MvbConfig& c, const std::string& v, const std::string& w) {
             try {
                 c.schedule_kind = schedule_kind_from_string(v);
             } catch (const Error&) {
                 fail_config("config: key '" + w + "' expects linear_vp or cosine_vp, got '" + v +
                             "'");
             }
         },
         [](const MvbConfig& c) {
             return std::string(c.schedule_kind == ScheduleKind::cosine_vp ? "cosine_vp"
                                                                           : "linear_vp");
         }});
    add("schedule", "T", num(&MvbConfig::schedule_T));

    add("refine", "strength", dbl(&MvbConfig::refine_strength));
    add("refine", "steps", num(&MvbConfig::refine_steps));

    add("oracle", "eta",
        {"", "",
         [](MvbConfig& c, const std::string& v, const std::string& w) {
             c.oracle.eta = parse_double(v, w);
         },
         [](const MvbConfig& c) { return fmt_double(c.oracle.eta); }});
    add("oracle", "kappa",
        {"", "",
         [](MvbConfig& c, const std::string& v, const std::string& w) {
             c.oracle.kappa = parse_double(v, w);
         },
         [](const MvbConfig& c) { return fmt_double(c.oracle.kappa); }});
    add("oracle", "knee",
        {"", "",
         [](MvbConfig& c, const std::string& v, const std::string& w) {
             c.oracle.knee = parse_double(v, w);
         },
         [](const MvbConfig& c) { return fmt_double(c.oracle.knee); }});

    add("inconsistency", "color_shift_amp",
        {"", "",
         [](MvbConfig& c, const std::string& v, const std::string& w) {
             c.inconsistency.color_shift_amp = parse_double(v, w);
         },
         [](const MvbConfig& c) { return fmt_double(c.inconsistency.color_shift_amp); }});
    add("inconsistency", "warp_amp",
        {"", "",
         [](MvbConfig& c, const std::string& v, const std::string& w) {
             c.inconsistency.warp_amp = parse_double(v, w);
         },
         [](const MvbConfig& c) { return fmt_double(c.inconsistency.warp_amp); }});
    add("inconsistency", "silhouette_noise_amp",
        {"", "",
         [](MvbConfig& c, const std::string& v, const std::string& w) {
             c.inconsistency.silhouette_noise_amp = parse_double(v, w);
         },
         [](const MvbConfig& c) { return fmt_double(c.inconsistency.silhouette_noise_amp); }});

    add("model", "d_model",
        {"", "",
         [](MvbConfig& c, const std::string& v, const std::string& w) {
             c.model.d_model = static_cast<int>(parse_int(v, w));
         },
         [](const MvbConfig& c) { return std::to_string(c.model.d_model); }});
    add("model", "layers",
        {"", "",
         [](MvbConfig& c, const std::string& v, const std::string& w) {
             c.model.layers = static_cast<int>(parse_int(v, w));
         },
         [](const MvbConfig& c) { return std::to_string(c.model.layers); }});
    add("model", "heads",
        {"", "",
         [](MvbConfig& c, const std::string& v, const std::string& w) {
             c.model.heads = static_cast<int>(parse_int(v, w));
         },
         [](const MvbConfig& c) { return std::to_string(c.model.heads); }});
    add("model", "patch",
        {"", "",
         [](MvbConfig& c, const std::string& v, const std::string& w) {
             c.model.patch = static_cast<int>(parse_int(v, w));
         },
         [](const MvbConfig& c) { return std::to_string(c.model.patch); }});
    add("model", "lora_rank",
        {"", "",
         [](MvbConfig& c, const std::string& v, const std::string& w) {
             c.model.lora_rank = static_cast<int>(parse_int(v, w));
         },
         [](const MvbConfig& c) { return std::to_string(c.model.lora_rank); }});
    add("model", "lora_alpha",
        {"", "",
         [](MvbConfig& c, const std::string& v, const std::string& w) {
             c.model.lora_alpha = parse_double(v, w);
         },
         [](const MvbConfig& c) { return fmt_double(c.model.lora_alpha); }});
    add("model", "lora_targets",
        {"", "",
         [](MvbConfig& c, const std::string& v, const std::string&) { c.model.lora_targets = v; },
         [](const MvbConfig& c) { return c.model.lora_targets; }});

    add("dataset", "seed", u64(&MvbConfig::dataset_seed));

    add("train", "steps", num(&MvbConfig::train_steps));
    add("train", "lr", dbl(&MvbConfig::train_lr));
    add("train", "view_sampling",
        {"", "",
         [](MvbConfig& c, const std::string& v, const std::string& w) {
             if (v == "all")
                 c.view_sampling = pipeline::ViewSampling::all;
             else if (v == "single")
                 c.view_sampling = pipeline::ViewSampling::single;
             else
                 fail_config("config: key '" + w + "' expects all or single, got '" + v + "'");
         },
         [](const MvbConfig& c) {
             return std::string(c.view_sampling == pipeline::ViewSampling::all ? "all" : "single");
         }});
    add("train", "mse_weight", dbl(&MvbConfig::mse_weight));
    add("train", "perceptual_weight", dbl(&MvbConfig::perceptual_weight));
    add("train", "perceptual_resolution", num(&MvbConfig::perceptual_resolution));
    add("train", "seed", u64(&MvbConfig::train_seed));
    add("train", "pretrain_steps", num(&MvbConfig::pretrain_steps));
    add("train", "pretrain_pool", num(&MvbConfig::pretrain_pool));
    add("train", "pretrain_seed", u64(&MvbConfig::pretrain_seed));

    add("eval", "scenes", num(&MvbConfig::eval_scenes));
    add("eval", "seed", u64(&MvbConfig::eval_seed));
    add("eval", "points", num(&MvbConfig::eval_points));
    add("eval", "orbit_views", num(&MvbConfig::orbit_views));

    add("ablate", "scenes", num(&MvbConfig::ablate_scenes));
    add("ablate", "strengths",
        {"", "",
         [](MvbConfig& c, const std::string& v, const std::string& w) {
             c.ablate_strengths = parse_double_list(v, w);
         },
         [](const MvbConfig& c) { return join_doubles(c.ablate_strengths); }});
    add("ablate", "seed", u64(&MvbConfig::ablate_seed));

    add("viewopt", "iters", num(&MvbConfig::viewopt_iters));
    add("viewopt", "lr", dbl(&MvbConfig::viewopt_lr));
    add("viewopt", "perceptual_resolution", num(&MvbConfig::viewopt_perceptual_resolution));
    add("viewopt", "scene_seed", u64(&MvbConfig::viewopt_scene_seed));
    add("viewopt", "mean_bound", dbl(&MvbConfig::viewopt_mean_bound));

    return t;
}

const std::vector<KeySpec>& keys() {
    static const std::vector<KeySpec> t = key_table();
    return t;
}

void check_range(bool ok, const std::string& where, const std::string& what) {
    if (!ok) fail_config("config: key '" + where + "' " + what);
}

void validate(const MvbConfig& c) {
    check_range(c.resolution >= 8 && c.resolution <= 1024, "core.resolution", "must be in [8,1024]");
    check_range(c.rig_extent > 0, "core.rig_extent", "must be positive");
    check_range(c.scene_count >= 1, "scenes.count", "must be at least 1");
    check_range(c.primitives >= 1 && c.primitives <= 8, "scenes.primitives", "must be in [1,8]");
    check_range(c.schedule_T >= 1, "schedule.T", "must be at least 1");
    check_range(c.refine_strength >= 0 && c.refine_strength <= 1, "refine.strength",
                "must be in [0,1]");
    check_range(c.refine_steps >= 1, "refine.steps", "must be at least 1");
    check_range(c.oracle.eta >= 0, "oracle.eta", "must be non-negative");
    check_range(c.oracle.kappa >= 0, "oracle.kappa", "must be non-negative");
    check_range(c.oracle.knee > 0 && c.oracle.knee < 1, "oracle.knee", "must be inside (0,1)");
    check_range(c.inconsistency.color_shift_amp >= 0, "inconsistency.color_shift_amp",
                "must be non-negative");
    check_range(c.inconsistency.warp_amp >= 0, "inconsistency.warp_amp", "must be non-negative");
    check_range(c.inconsistency.silhouette_noise_amp >= 0, "inconsistency.silhouette_noise_amp",
                "must be non-negative");
    try {
        recon::validate_model_config(c.model);
    } catch (const Error& e) {
        fail_config(std::string("config: section [model]: ") + e.what());
    }
    check_range(c.train_steps >= 0, "train.steps", "must be non-negative");
    check_range(c.train_lr > 0, "train.lr", "must be positive");
    check_range(c.mse_weight >= 0, "train.mse_weight", "must be non-negative");
    check_range(c.perceptual_weight >= 0, "train.perceptual_weight", "must be non-negative");
    check_range(c.mse_weight > 0 || c.perceptual_weight > 0, "train.mse_weight",
                "and train.perceptual_weight cannot both be zero");
    check_range(c.perceptual_resolution >= 20, "train.perceptual_resolution", "must be at least 20");
    check_range(c.resolution % c.perceptual_resolution == 0, "train.perceptual_resolution",
                "must divide core.resolution");
    check_range(c.pretrain_steps >= 0, "train.pretrain_steps", "must be non-negative");
    check_range(c.pretrain_pool >= 1, "train.pretrain_pool", "must be at least 1");
    check_range(c.eval_scenes >= 1, "eval.scenes", "must be at least 1");
    check_range(c.eval_points >= 1, "eval.points", "must be at least 1");
    check_range(c.orbit_views >= 1, "eval.orbit_views", "must be at least 1");
    check_range(c.ablate_scenes >= 1, "ablate.scenes", "must be at least 1");
    for (double s : c.ablate_strengths)
        check_range(s >= 0 && s <= 1, "ablate.strengths", "entries must be in [0,1]");
    check_range(c.viewopt_iters >= 0, "viewopt.iters", "must be non-negative");
    check_range(c.viewopt_lr > 0, "viewopt.lr", "must be positive");
    check_range(c.viewopt_perceptual_resolution >= 20, "viewopt.perceptual_resolution",
                "must be at least 20");
    check_range(c.resolution % c.viewopt_perceptual_resolution == 0,
                "viewopt.perceptual_resolution", "must divide core.resolution");
    check_range(c.viewopt_mean_bound > 0, "viewopt.mean_bound", "must be positive");
    check_range(c.resolution % c.model.patch == 0, "model.patch", "must divide core.resolution");
    // palette must parse
    scene_spec(c, 0);
}

}  // namespace

MvbConfig parse_config_text(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    bool version_seen = false;
    std::string section;
    MvbConfig cfg;
    std::vector<std::string> seen;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (!version_seen) {
            if (t != "mvbconfig v1")
                fail_config("config " + origin + ": first line must be 'mvbconfig v1'");
            version_seen = true;
            continue;
        }
        if (t.front() == '[') {
            if (t.back() != ']')
                fail_config("config " + origin + ":" + std::to_string(lineno) +
                            ": malformed section header '" + t + "'");
            section = trim(t.substr(1, t.size() - 2));
            bool known = false;
            for (const KeySpec& k : keys()) known = known || k.section == section;
            if (!known)
                fail_config("config " + origin + ": unknown section '" + section + "'");
            continue;
        }
        const size_t eq = t.find('=');
        if (eq == std::string::npos)
            fail_config("config " + origin + ":" + std::to_string(lineno) +
                        ": expected 'key = value', got '" + t + "'");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (section.empty())
            fail_config("config " + origin + ": key '" + key + "' appears before any section");
        const std::string where = section + "." + key;
        const KeySpec* spec = nullptr;
        for (const KeySpec& k : keys())
            if (k.section == section && k.key == key) spec = &k;
        if (spec == nullptr)
            fail_config("config " + origin + ": unknown key '" + where + "'");
        if (std::find(seen.begin(), seen.end(), where) != seen.end())
            fail_config("config " + origin + ": duplicate key '" + where + "'");
        seen.push_back(where);
        spec->set(cfg, value, where);
    }
    if (!version_seen) fail_config("config " + origin + ": empty file (missing 'mvbconfig v1')");
    validate(cfg);
    return cfg;
}

MvbConfig parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) fail_config("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str(), path);
}

std::string canonical_config_text(const MvbConfig& cfg) {
    std::string out = "mvbconfig v1\n";
    std::string section;
    for (const KeySpec& k : keys()) {
        if (k.section != section) {
            section = k.section;
            out += "[" + section + "]\n";
        }
        out += k.key + " = " + k.get(cfg) + "\n";
    }
    return out;
}

std::uint64_t config_hash(const MvbConfig& cfg) {
    const std::string text = canonical_config_text(cfg);
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string default_config_text() { return canonical_config_text(MvbConfig{}); }

namespace {
const KeySpec& find_key(const std::string& dotted_key) {
    const size_t dot = dotted_key.find('.');
    if (dot == std::string::npos)
        fail_config("config: key '" + dotted_key + "' must be written 'section.key'");
    const std::string section = dotted_key.substr(0, dot);
    const std::string key = dotted_key.substr(dot + 1);
    for (const KeySpec& k : keys())
        if (k.section == section && k.key == key) return k;
    fail_config("config: unknown key '" + dotted_key + "'");
}
}  // namespace

void set_key(MvbConfig& cfg, const std::string& dotted_key, const std::string& value) {
    find_key(dotted_key).set(cfg, value, dotted_key);
}

std::string get_key(const MvbConfig& cfg, const std::string& dotted_key) {
    return find_key(dotted_key).get(cfg);
}

void validate_config(const MvbConfig& cfg) { validate(cfg); }

pipeline::DatasetBuildConfig to_dataset_build_config(const MvbConfig& cfg) {
    pipeline::DatasetBuildConfig d;
    d.inc = cfg.inconsistency;
    d.refine.strength = cfg.refine_strength;
    d.refine.steps = cfg.refine_steps;
    d.oracle = cfg.oracle;
    d.schedule_T = cfg.schedule_T;
    d.schedule_kind = cfg.schedule_kind;
    d.resolution = cfg.resolution;
    d.rig_extent = cfg.rig_extent;
    d.seed = cfg.dataset_seed;
    return d;
}

pipeline::TrainConfig to_boost_train_config(const MvbConfig& cfg) {
    pipeline::TrainConfig t;
    t.steps = cfg.train_steps;
    t.adam.lr = cfg.train_lr;
    t.view_sampling = cfg.view_sampling;
    t.loss.mse_weight = cfg.mse_weight;
    t.loss.perceptual_weight = cfg.perceptual_weight;
    t.loss.perceptual_resolution = cfg.perceptual_resolution;
    t.seed = cfg.train_seed;
    return t;
}

pipeline::TrainConfig to_pretrain_config(const MvbConfig& cfg) {
    pipeline::TrainConfig t = to_boost_train_config(cfg);
    t.steps = cfg.pretrain_steps;
    t.view_sampling = pipeline::ViewSampling::all;
    t.seed = cfg.pretrain_seed + 1;
    return t;
}

pipeline::EvalConfig to_eval_config(const MvbConfig& cfg) {
    pipeline::EvalConfig e;
    e.inc = cfg.inconsistency;
    e.resolution = cfg.resolution;
    e.rig_extent = cfg.rig_extent;
    e.points = cfg.eval_points;
    e.seed = cfg.eval_seed;
    e.orbit_views = cfg.orbit_views;
    e.perceptual_resolution = cfg.perceptual_resolution;
    return e;
}

viewopt::ResidualOptConfig to_viewopt_config(const MvbConfig& cfg) {
    viewopt::ResidualOptConfig v;
    v.iters = cfg.viewopt_iters;
    v.lr = cfg.viewopt_lr;
    v.perceptual_resolution = cfg.viewopt_perceptual_resolution;
    v.mean_bound = cfg.viewopt_mean_bound;
    return v;
}

SceneSpec scene_spec(const MvbConfig& cfg, std::uint64_t seed) {
    SceneSpec s;
    s.primitive_count = cfg.primitives;
    s.seed = seed;
    if (!cfg.palette.empty()) {
        std::stringstream ss(cfg.palette);
        std::string item;
        while (std::getline(ss, item, ';')) {
            Vec3 c;
            if (std::sscanf(item.c_str(), "%lf,%lf,%lf", &c.x, &c.y, &c.z) != 3)
                fail_config("config: key 'scenes.palette' has a bad entry '" + item +
                            "' (want r,g,b;r,g,b;...)");
            s.palette.push_back(c);
        }
    }
    return s;
}

}  // namespace mvb::config
