// mvboost command-line tool. All functionality goes through the public C
// API (include/mvboost.h); this file only parses arguments, maps flags onto
// configuration keys, and turns status codes into exit codes:
//   0 success, 1 bad argument, 2 configuration error, 3 data error,
//   4 numerical abort.

#include <cstdio>
#include <cstdlib>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "mvboost.h"

namespace {

struct ConfigHandle {
    mvb_config* cfg = nullptr;
    ~ConfigHandle() { mvb_config_destroy(cfg); }
};

[[noreturn]] void die(mvb_status rc) {
    std::fprintf(stderr, "mvboost: %s\n", mvb_last_error());
    std::exit(rc);
}

void check(mvb_status rc) {
    if (rc != MVB_OK) die(rc);
}

// Builds the effective configuration: defaults, then the optional config
// file, then --set overrides, then flag-specific overrides.
mvb_config* make_config(const std::string& config_path,
                        const std::vector<std::string>& sets,
                        const std::vector<std::pair<std::string, std::string>>& overrides) {
    mvb_config* cfg = nullptr;
    if (config_path.empty())
        check(mvb_config_create(&cfg));
    else
        check(mvb_config_load(config_path.c_str(), &cfg));
    for (const std::string& kv : sets) {
        const size_t eq = kv.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "mvboost: --set expects section.key=value, got '%s'\n",
                         kv.c_str());
            mvb_config_destroy(cfg);
            std::exit(MVB_ERR_CONFIG);
        }
        mvb_status rc = mvb_config_set(cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
        if (rc != MVB_OK) {
            mvb_config_destroy(cfg);
            die(rc);
        }
    }
    for (const auto& [key, value] : overrides) {
        mvb_status rc = mvb_config_set(cfg, key.c_str(), value.c_str());
        if (rc != MVB_OK) {
            mvb_config_destroy(cfg);
            die(rc);
        }
    }
    return cfg;
}

std::string get_key(const mvb_config* cfg, const char* key) {
    char buf[256];
    check(mvb_config_get(cfg, key, buf, sizeof buf));
    return buf;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mvboost: multi-view refinement boosting for Gaussian reconstruction"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(mvb_version()));

    // Flags shared by every subcommand.
    std::string config_path;
    std::vector<std::string> sets;
    app.add_option("--config", config_path, "configuration file (defaults apply when omitted)")
        ->expected(1);
    app.add_option("--set", sets, "override one key, e.g. --set refine.strength=0.9");
    for (auto* opt : {app.get_option("--config"), app.get_option("--set")})
        opt->configurable(false);

    // gen-scenes
    auto* gen = app.add_subcommand("gen-scenes", "generate synthetic scenes with reference renders");
    std::string gen_out;
    int gen_count = -1;
    std::uint64_t gen_seed = 0;
    bool gen_force = false;
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--count", gen_count, "number of scenes (default: scenes.scene_count)");
    auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "override scenes.scenes_seed");
    gen->add_flag("--force", gen_force, "overwrite a non-empty output directory");

    // pretrain-base
    auto* pre = app.add_subcommand("pretrain-base", "train the base reconstructor from scratch");
    std::string pre_out;
    std::uint64_t pre_seed = 0;
    int pre_steps = 0;
    pre->add_option("--out", pre_out, "output checkpoint path")->required();
    auto* pre_seed_opt = pre->add_option("--seed", pre_seed, "override train.pretrain_seed");
    auto* pre_steps_opt = pre->add_option("--steps", pre_steps, "override train.pretrain_steps");

    // build-dataset
    auto* bld = app.add_subcommand("build-dataset", "build the refined training set");
    std::string bld_base, bld_scenes, bld_out;
    std::uint64_t bld_seed = 0;
    double bld_strength = 0;
    int bld_steps = 0;
    bool bld_force = false;
    bld->add_option("--base", bld_base, "base checkpoint")->required();
    bld->add_option("--scenes", bld_scenes, "scene directory from gen-scenes")->required();
    bld->add_option("--out", bld_out, "output dataset directory")->required();
    auto* bld_seed_opt = bld->add_option("--seed", bld_seed, "override dataset.dataset_seed");
    auto* bld_strength_opt =
        bld->add_option("--strength", bld_strength, "override refine.strength");
    auto* bld_steps_opt = bld->add_option("--steps", bld_steps, "override refine.steps");
    bld->add_flag("--force", bld_force, "rebuild from scratch");

    // train
    auto* trn = app.add_subcommand("train", "adapter training on a built dataset");
    std::string trn_base, trn_dataset, trn_out;
    std::uint64_t trn_seed = 0;
    int trn_steps = 0;
    trn->add_option("--base", trn_base, "base checkpoint")->required();
    trn->add_option("--dataset", trn_dataset, "dataset directory from build-dataset")->required();
    trn->add_option("--out", trn_out, "output adapter checkpoint path")->required();
    auto* trn_seed_opt = trn->add_option("--seed", trn_seed, "override train.train_seed");
    auto* trn_steps_opt = trn->add_option("--steps", trn_steps, "override train.train_steps");

    // eval
    auto* evl = app.add_subcommand("eval", "evaluate base vs boosted on stored scenes");
    std::string evl_base, evl_adapter, evl_scenes, evl_out;
    evl->add_option("--base", evl_base, "base checkpoint")->required();
    evl->add_option("--adapter", evl_adapter, "adapter checkpoint")->required();
    evl->add_option("--scenes", evl_scenes, "scene directory from gen-scenes")->required();
    evl->add_option("--out", evl_out, "report CSV path")->required();

    // ablate-strength
    auto* abl = app.add_subcommand("ablate-strength", "refinement-strength sweep");
    std::string abl_base, abl_out;
    std::vector<double> abl_strengths;
    std::uint64_t abl_seed = 0;
    abl->add_option("--base", abl_base, "base checkpoint")->required();
    abl->add_option("--out", abl_out, "report CSV path")->required();
    abl->add_option("--strengths", abl_strengths,
                    "strength values (default: ablate.strengths)")
        ->delimiter(',');
    auto* abl_seed_opt = abl->add_option("--seed", abl_seed, "override ablate.ablate_seed");

    // optimize-view
    auto* opt = app.add_subcommand("optimize-view", "pose search plus residual fit for one view");
    std::string opt_base, opt_adapter, opt_input, opt_out;
    int opt_steps = 0;
    opt->add_option("--base", opt_base, "base checkpoint")->required();
    opt->add_option("--adapter", opt_adapter, "adapter checkpoint (optional)");
    opt->add_option("--input", opt_input, "input view PNG inside a gen-scenes directory")
        ->required();
    opt->add_option("--out", opt_out, "output directory")->required();
    auto* opt_steps_opt = opt->add_option("--steps", opt_steps, "override viewopt.iters");

    // print-config
    auto* prt = app.add_subcommand("print-config", "print the effective configuration hash");

    // Let the shared --config/--set flags appear after the subcommand name.
    for (CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; }))
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
        app.exit(e);
        return MVB_ERR_CONFIG;
    }

    std::vector<std::pair<std::string, std::string>> overrides;
    auto add_override = [&overrides](const CLI::Option* o, const char* key, const std::string& v) {
        if (o->count() > 0) overrides.emplace_back(key, v);
    };

    if (*gen) {
        add_override(gen_seed_opt, "scenes.seed", std::to_string(gen_seed));
        ConfigHandle h{make_config(config_path, sets, overrides)};
        if (gen_count < 0) gen_count = std::stoi(get_key(h.cfg, "scenes.count"));
        check(mvb_gen_scenes(h.cfg, gen_count, gen_out.c_str(), gen_force ? 1 : 0));
        std::printf("generated %d scenes under %s\n", gen_count, gen_out.c_str());
    } else if (*pre) {
        add_override(pre_seed_opt, "train.pretrain_seed", std::to_string(pre_seed));
        add_override(pre_steps_opt, "train.pretrain_steps", std::to_string(pre_steps));
        ConfigHandle h{make_config(config_path, sets, overrides)};
        check(mvb_pretrain_base(h.cfg, pre_out.c_str()));
        std::printf("base checkpoint written to %s\n", pre_out.c_str());
    } else if (*bld) {
        add_override(bld_seed_opt, "dataset.seed", std::to_string(bld_seed));
        add_override(bld_strength_opt, "refine.strength", std::to_string(bld_strength));
        add_override(bld_steps_opt, "refine.steps", std::to_string(bld_steps));
        ConfigHandle h{make_config(config_path, sets, overrides)};
        check(mvb_build_dataset(h.cfg, bld_base.c_str(), bld_scenes.c_str(), bld_out.c_str(),
                                bld_force ? 1 : 0));
        std::printf("dataset written to %s\n", bld_out.c_str());
    } else if (*trn) {
        add_override(trn_seed_opt, "train.seed", std::to_string(trn_seed));
        add_override(trn_steps_opt, "train.steps", std::to_string(trn_steps));
        ConfigHandle h{make_config(config_path, sets, overrides)};
        check(mvb_train(h.cfg, trn_base.c_str(), trn_dataset.c_str(), trn_out.c_str()));
        std::printf("adapter checkpoint written to %s\n", trn_out.c_str());
    } else if (*evl) {
        ConfigHandle h{make_config(config_path, sets, overrides)};
        check(mvb_eval(h.cfg, evl_base.c_str(), evl_adapter.c_str(), evl_scenes.c_str(),
                       evl_out.c_str()));
        std::printf("report written to %s (summary: %s.summary.txt)\n", evl_out.c_str(),
                    evl_out.c_str());
    } else if (*abl) {
        add_override(abl_seed_opt, "ablate.seed", std::to_string(abl_seed));
        ConfigHandle h{make_config(config_path, sets, overrides)};
        check(mvb_ablate_strength(h.cfg, abl_base.c_str(),
                                  abl_strengths.empty() ? nullptr : abl_strengths.data(),
                                  static_cast<int>(abl_strengths.size()), abl_out.c_str()));
        std::printf("report written to %s (summary: %s.summary.txt)\n", abl_out.c_str(),
                    abl_out.c_str());
    } else if (*opt) {
        add_override(opt_steps_opt, "viewopt.iters", std::to_string(opt_steps));
        ConfigHandle h{make_config(config_path, sets, overrides)};
        check(mvb_optimize_view(h.cfg, opt_base.c_str(),
                                opt_adapter.empty() ? nullptr : opt_adapter.c_str(),
                                opt_input.c_str(), opt_out.c_str()));
        std::printf("optimization artifacts written to %s\n", opt_out.c_str());
    } else if (*prt) {
        ConfigHandle h{make_config(config_path, sets, overrides)};
        char hash[17];
        check(mvb_config_hash(h.cfg, hash, sizeof hash));
        std::printf("config_hash %s\n", hash);
    }
    return 0;
}
