// Implementation of the public C interface (include/mvboost.h).
//
// Every entry point validates its arguments, runs the corresponding pipeline
// code, and converts exceptions into status codes plus a thread-local
// message. Commands that write artifacts also write a small key=value
// manifest carrying the configuration hash and the seeds needed to replay
// the artifact bit-exactly.

#include "mvboost.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "config/config.hpp"
#include "core/error.hpp"
#include "core/image.hpp"
#include "core/rng.hpp"
#include "core/scene.hpp"
#include "diffusion/refine.hpp"
#include "diffusion/schedule.hpp"
#include "metrics/image_metrics.hpp"
#include "metrics/perceptual.hpp"
#include "oracle/denoiser.hpp"
#include "oracle/mv_generate.hpp"
#include "oracle/scene_gen.hpp"
#include "pipeline/dataset.hpp"
#include "pipeline/eval.hpp"
#include "pipeline/train.hpp"
#include "recon/checkpoint.hpp"
#include "recon/model.hpp"
#include "render/rasterizer.hpp"
#include "viewopt/viewopt.hpp"

namespace fs = std::filesystem;

struct mvb_config {
    mvb::config::MvbConfig v;
};

namespace {

thread_local std::string g_last_error;

template <typename Fn>
mvb_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return MVB_OK;
    } catch (const mvb::Error& e) {
        g_last_error = e.what();
        return static_cast<mvb_status>(static_cast<int>(e.kind()));
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return MVB_ERR_PARAM;
    }
}

void require(const void* p, const char* name) {
    if (p == nullptr) mvb::fail_param(std::string(name) + " is null");
}

std::string hex16(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Worker count for per-scene parallel loops: hardware concurrency, capped by
// the MVB_THREADS environment variable when set.
int worker_threads() {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    if (const char* env = std::getenv("MVB_THREADS")) {
        char* end = nullptr;
        long cap = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || cap < 1)
            mvb::fail_config(std::string("MVB_THREADS must be a positive integer, got '") + env +
                             "'");
        n = std::min<long>(n, cap);
    }
    return n;
}

// Runs fn(i) for i in [0, count). Workers only run forward passes (no
// backward), so sharing frozen parameter tensors across threads is safe: op
// creation never mutates its parents. The first exception wins and is
// rethrown on the calling thread.
template <typename Fn>
void parallel_for(int count, Fn&& fn) {
    const int threads = std::min(worker_threads(), count);
    if (threads <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
                next.store(count);  // stop handing out work
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

using Manifest = std::vector<std::pair<std::string, std::string>>;

void write_manifest(const fs::path& path, const Manifest& kv) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) mvb::fail_data("cannot write manifest: " + path.string());
    for (const auto& [k, v] : kv) f << k << "=" << v << "\n";
    f.flush();
    if (!f) mvb::fail_data("short write to manifest: " + path.string());
}

std::map<std::string, std::string> read_manifest(const fs::path& path) {
    std::ifstream f(path);
    if (!f) mvb::fail_data("cannot open manifest: " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            mvb::fail_data("manifest " + path.string() + ": malformed line '" + line + "'");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

const std::string& need(const std::map<std::string, std::string>& kv, const std::string& key,
                        const fs::path& path) {
    auto it = kv.find(key);
    if (it == kv.end())
        mvb::fail_data("manifest " + path.string() + " is missing key '" + key + "'");
    return it->second;
}

const mvb::config::MvbConfig& checked(const mvb_config* cfg) {
    require(cfg, "cfg");
    mvb::config::validate_config(cfg->v);
    return cfg->v;
}

// One scene directory as written by mvb_gen_scenes.
struct StoredScene {
    std::string id;
    mvb::SceneSpec spec;
    fs::path dir;
};

mvb::SceneSpec spec_from_scene_manifest(const std::map<std::string, std::string>& kv,
                                        const fs::path& mpath) {
    mvb::SceneSpec spec;
    spec.seed = std::stoull(need(kv, "scene_seed", mpath));
    spec.primitive_count = std::stoi(need(kv, "primitive_count", mpath));
    const std::string palette = need(kv, "palette", mpath);
    if (!palette.empty()) {
        mvb::config::MvbConfig tmp;
        tmp.palette = palette;
        spec.palette = mvb::config::scene_spec(tmp, spec.seed).palette;
    }
    return spec;
}

std::vector<StoredScene> collect_scenes(const fs::path& scenes_dir) {
    if (!fs::is_directory(scenes_dir))
        mvb::fail_data("scene directory does not exist: " + scenes_dir.string());
    std::vector<StoredScene> out;
    for (const auto& entry : fs::directory_iterator(scenes_dir)) {
        if (!entry.is_directory()) continue;
        const fs::path mpath = entry.path() / "manifest.txt";
        if (!fs::exists(mpath)) continue;
        auto kv = read_manifest(mpath);
        if (need(kv, "format", mpath) != "MVB-SCv1")
            mvb::fail_data("manifest " + mpath.string() + ": unknown format");
        StoredScene s;
        s.id = need(kv, "scene_id", mpath);
        s.spec = spec_from_scene_manifest(kv, mpath);
        s.dir = entry.path();
        out.push_back(std::move(s));
    }
    if (out.empty())
        mvb::fail_data("no scenes under " + scenes_dir.string() +
                       " (expected subdirectories created by gen-scenes)");
    std::sort(out.begin(), out.end(),
              [](const StoredScene& a, const StoredScene& b) { return a.spec.seed < b.spec.seed; });
    return out;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.8f", v);
    return buf;
}

struct MeanStd {
    double mean = 0, std = 0;
};

MeanStd mean_std(const std::vector<double>& xs) {
    MeanStd r;
    if (xs.empty()) return r;
    for (double x : xs) r.mean += x;
    r.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double acc = 0;
        for (double x : xs) acc += (x - r.mean) * (x - r.mean);
        r.std = std::sqrt(acc / static_cast<double>(xs.size() - 1));
    }
    return r;
}

}  // namespace

extern "C" {

MVB_API const char* mvb_last_error(void) { return g_last_error.c_str(); }

MVB_API const char* mvb_version(void) { return "1.0.0"; }

MVB_API mvb_status mvb_config_create(mvb_config** out) {
    return guarded([&] {
        require(out, "out");
        *out = new mvb_config{};
    });
}

MVB_API mvb_status mvb_config_load(const char* path, mvb_config** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        auto cfg = std::make_unique<mvb_config>();
        cfg->v = mvb::config::parse_config_file(path);
        *out = cfg.release();
    });
}

MVB_API mvb_status mvb_config_set(mvb_config* cfg, const char* key, const char* value) {
    return guarded([&] {
        require(cfg, "cfg");
        require(key, "key");
        require(value, "value");
        mvb::config::set_key(cfg->v, key, value);
    });
}

MVB_API mvb_status mvb_config_get(const mvb_config* cfg, const char* key, char* buf, int buf_len) {
    return guarded([&] {
        require(cfg, "cfg");
        require(key, "key");
        require(buf, "buf");
        const std::string v = mvb::config::get_key(cfg->v, key);
        if (buf_len < static_cast<int>(v.size()) + 1)
            mvb::fail_param("buffer too small for value of '" + std::string(key) + "' (need " +
                            std::to_string(v.size() + 1) + " bytes)");
        std::memcpy(buf, v.c_str(), v.size() + 1);
    });
}

MVB_API mvb_status mvb_config_hash(const mvb_config* cfg, char* buf, int buf_len) {
    return guarded([&] {
        require(cfg, "cfg");
        require(buf, "buf");
        if (buf_len < 17) mvb::fail_param("hash buffer must hold at least 17 bytes");
        const std::string h = hex16(mvb::config::config_hash(cfg->v));
        std::memcpy(buf, h.c_str(), h.size() + 1);
    });
}

MVB_API void mvb_config_destroy(mvb_config* cfg) { delete cfg; }

MVB_API mvb_status mvb_gen_scenes(const mvb_config* cfg, int count, const char* out_dir,
                                  int force) {
    return guarded([&] {
        const auto& c = checked(cfg);
        require(out_dir, "out_dir");
        if (count < 1) mvb::fail_param("count must be >= 1");
        const fs::path root(out_dir);
        if (fs::exists(root)) {
            if (!fs::is_directory(root))
                mvb::fail_data("out_dir exists and is not a directory: " + root.string());
            if (!fs::is_empty(root)) {
                if (!force)
                    mvb::fail_data("out_dir is not empty: " + root.string() +
                                   " (pass force to overwrite)");
                fs::remove_all(root);
            }
        }
        fs::create_directories(root);
        const std::string cfg_hash = hex16(mvb::config::config_hash(c));
        const mvb::CanonicalRig rig = mvb::make_canonical_rig(c.rig_extent);
        for (int i = 0; i < count; ++i) {
            const std::uint64_t seed = c.scenes_seed + static_cast<std::uint64_t>(i);
            const mvb::SceneSpec spec = mvb::config::scene_spec(c, seed);
            const mvb::GaussianScene scene = mvb::generate_scene(spec);
            const std::string id = "s" + std::to_string(seed);
            const fs::path dir = root / id;
            fs::create_directories(dir);
            mvb::save_scene(scene, (dir / "scene.txt").string());
            const mvb::MultiViewSet views = mvb::render_rig_views(scene, rig, c.resolution);
            for (size_t v = 0; v < views.size(); ++v)
                mvb::save_png(views.views[v],
                              (dir / ("gt_" + std::string(mvb::kRigLabels[v]) + ".png")).string());
            write_manifest(dir / "manifest.txt",
                           {{"format", "MVB-SCv1"},
                            {"scene_id", id},
                            {"scene_seed", std::to_string(seed)},
                            {"primitive_count", std::to_string(spec.primitive_count)},
                            {"palette", c.palette},
                            {"resolution", std::to_string(c.resolution)},
                            {"extent", fmt(c.rig_extent)},
                            {"config_hash", cfg_hash}});
        }
        write_manifest(root / "manifest.txt", {{"format", "MVB-SDv1"},
                                               {"scene_count", std::to_string(count)},
                                               {"scenes_seed", std::to_string(c.scenes_seed)},
                                               {"resolution", std::to_string(c.resolution)},
                                               {"extent", fmt(c.rig_extent)},
                                               {"config_hash", cfg_hash}});
    });
}

MVB_API mvb_status mvb_pretrain_base(const mvb_config* cfg, const char* out_checkpoint) {
    return guarded([&] {
        const auto& c = checked(cfg);
        require(out_checkpoint, "out_checkpoint");
        mvb::recon::ReconstructorParams params =
            mvb::recon::init_base_params(c.model, c.pretrain_seed);
        std::vector<mvb::SceneSpec> pool;
        for (int i = 0; i < c.pretrain_pool; ++i)
            pool.push_back(mvb::config::scene_spec(
                c, 100 * c.pretrain_seed + static_cast<std::uint64_t>(i)));
        mvb::pipeline::TrainConfig tc = mvb::config::to_pretrain_config(c);
        tc.log_path = std::string(out_checkpoint) + ".log.csv";
        const mvb::pipeline::TrainReport rep =
            mvb::pipeline::pretrain_base(params, pool, c.resolution, c.rig_extent, tc);
        mvb::recon::save_base_checkpoint(out_checkpoint, params);
        write_manifest(fs::path(std::string(out_checkpoint) + ".manifest.txt"),
                       {{"format", "MVB-CKv1"},
                        {"kind", "base"},
                        {"config_hash", hex16(mvb::config::config_hash(c))},
                        {"pretrain_seed", std::to_string(c.pretrain_seed)},
                        {"pretrain_pool", std::to_string(c.pretrain_pool)},
                        {"steps", std::to_string(c.pretrain_steps)},
                        {"early_loss", fmt(rep.early_loss)},
                        {"late_loss", fmt(rep.late_loss)},
                        {"params_digest", std::to_string(mvb::recon::params_digest(params))}});
    });
}

MVB_API mvb_status mvb_build_dataset(const mvb_config* cfg, const char* base_checkpoint,
                                     const char* scenes_dir, const char* out_dir, int force) {
    return guarded([&] {
        const auto& c = checked(cfg);
        require(base_checkpoint, "base_checkpoint");
        require(scenes_dir, "scenes_dir");
        require(out_dir, "out_dir");
        const mvb::recon::ReconstructorParams base =
            mvb::recon::load_base_checkpoint(base_checkpoint, c.model);
        const std::vector<StoredScene> scenes = collect_scenes(scenes_dir);
        std::vector<mvb::SceneSpec> specs;
        for (const StoredScene& s : scenes) specs.push_back(s.spec);
        if (force && fs::exists(out_dir)) fs::remove_all(out_dir);
        const mvb::pipeline::DatasetBuildConfig dc = mvb::config::to_dataset_build_config(c);
        mvb::pipeline::build_refined_dataset(specs, dc, base, out_dir);
        write_manifest(
            fs::path(out_dir) / "manifest.txt",
            {{"format", "MVB-DDv1"},
             {"config_hash", hex16(mvb::config::config_hash(c))},
             {"dataset_hash", std::to_string(mvb::pipeline::dataset_config_hash(dc))},
             {"base_digest", std::to_string(mvb::recon::params_digest(base))},
             {"scene_count", std::to_string(specs.size())},
             {"dataset_seed", std::to_string(c.dataset_seed)}});
    });
}

MVB_API mvb_status mvb_train(const mvb_config* cfg, const char* base_checkpoint,
                             const char* dataset_dir, const char* out_checkpoint) {
    return guarded([&] {
        const auto& c = checked(cfg);
        require(base_checkpoint, "base_checkpoint");
        require(dataset_dir, "dataset_dir");
        require(out_checkpoint, "out_checkpoint");
        mvb::recon::ReconstructorParams base =
            mvb::recon::load_base_checkpoint(base_checkpoint, c.model);
        const fs::path mpath = fs::path(dataset_dir) / "manifest.txt";
        if (!fs::exists(mpath))
            mvb::fail_data("not a dataset directory (missing manifest): " +
                           fs::path(dataset_dir).string());
        auto kv = read_manifest(mpath);
        if (need(kv, "format", mpath) != "MVB-DDv1")
            mvb::fail_data("manifest " + mpath.string() + ": unknown format");
        const mvb::pipeline::DatasetBuildConfig dc = mvb::config::to_dataset_build_config(c);
        const std::string want = std::to_string(mvb::pipeline::dataset_config_hash(dc));
        if (need(kv, "dataset_hash", mpath) != want)
            mvb::fail_data("dataset at " + fs::path(dataset_dir).string() +
                           " was built under a different configuration (hash " +
                           kv.at("dataset_hash") + ", current config wants " + want +
                           "); rebuild it or restore the matching config");
        const std::string base_digest = std::to_string(mvb::recon::params_digest(base));
        if (need(kv, "base_digest", mpath) != base_digest)
            mvb::fail_data("dataset at " + fs::path(dataset_dir).string() +
                           " was built through different base weights (digest " +
                           kv.at("base_digest") + " vs " + base_digest + ")");
        const std::vector<mvb::pipeline::RefinedPair> ds =
            mvb::pipeline::load_refined_dataset(dataset_dir);
        mvb::recon::LoraParams lora = mvb::recon::init_lora_params(c.model, c.train_seed);
        mvb::pipeline::TrainConfig tc = mvb::config::to_boost_train_config(c);
        tc.log_path = std::string(out_checkpoint) + ".log.csv";
        const mvb::pipeline::TrainReport rep = mvb::pipeline::train_boost(ds, base, lora, tc);
        mvb::recon::save_lora_checkpoint(out_checkpoint, lora);
        write_manifest(fs::path(std::string(out_checkpoint) + ".manifest.txt"),
                       {{"format", "MVB-CKv1"},
                        {"kind", "lora"},
                        {"config_hash", hex16(mvb::config::config_hash(c))},
                        {"train_seed", std::to_string(c.train_seed)},
                        {"steps", std::to_string(c.train_steps)},
                        {"base_digest", base_digest},
                        {"early_loss", fmt(rep.early_loss)},
                        {"late_loss", fmt(rep.late_loss)}});
    });
}

MVB_API mvb_status mvb_eval(const mvb_config* cfg, const char* base_checkpoint,
                            const char* adapter_checkpoint, const char* scenes_dir,
                            const char* report_path) {
    return guarded([&] {
        const auto& c = checked(cfg);
        require(base_checkpoint, "base_checkpoint");
        require(adapter_checkpoint, "adapter_checkpoint");
        require(scenes_dir, "scenes_dir");
        require(report_path, "report_path");
        const mvb::recon::ReconstructorParams base =
            mvb::recon::load_base_checkpoint(base_checkpoint, c.model);
        const mvb::recon::LoraParams lora =
            mvb::recon::load_lora_checkpoint(adapter_checkpoint, c.model);
        const std::vector<StoredScene> scenes = collect_scenes(scenes_dir);
        const mvb::pipeline::EvalConfig ec = mvb::config::to_eval_config(c);
        const int n = static_cast<int>(scenes.size());
        std::vector<mvb::pipeline::SceneEval> base_evals(n), boost_evals(n);
        parallel_for(n, [&](int i) {
            base_evals[i] = mvb::pipeline::evaluate_scene(scenes[i].spec, base, nullptr, ec);
            boost_evals[i] = mvb::pipeline::evaluate_scene(scenes[i].spec, base, &lora, ec);
        });

        std::ofstream f(report_path, std::ios::trunc);
        if (!f) mvb::fail_data(std::string("cannot write report: ") + report_path);
        f << "# config_hash=" << hex16(mvb::config::config_hash(c)) << " eval_seed=" << c.eval_seed
          << " orbit_views=" << c.orbit_views << " points=" << c.eval_points << "\n";
        f << "scene_id,model,psnr,ssim,perceptual,chamfer,fscore\n";
        auto row = [&](const std::string& id, const char* model,
                       const mvb::pipeline::SceneEval& e) {
            f << id << "," << model << "," << fmt(e.psnr) << "," << fmt(e.ssim) << ","
              << fmt(e.perceptual) << "," << fmt(e.chamfer) << "," << fmt(e.fscore) << "\n";
        };
        for (int i = 0; i < n; ++i) {
            row(scenes[i].id, "base", base_evals[i]);
            row(scenes[i].id, "boosted", boost_evals[i]);
        }
        f.flush();
        if (!f) mvb::fail_data(std::string("short write to report: ") + report_path);

        // Summary: mean +/- std per metric per model, plus paired win counts.
        struct Metric {
            const char* name;
            double mvb::pipeline::SceneEval::* field;
            bool higher_better;
        };
        const Metric metrics[] = {{"psnr", &mvb::pipeline::SceneEval::psnr, true},
                                  {"ssim", &mvb::pipeline::SceneEval::ssim, true},
                                  {"perceptual", &mvb::pipeline::SceneEval::perceptual, false},
                                  {"chamfer", &mvb::pipeline::SceneEval::chamfer, false},
                                  {"fscore", &mvb::pipeline::SceneEval::fscore, true}};
        std::ofstream s(std::string(report_path) + ".summary.txt", std::ios::trunc);
        if (!s) mvb::fail_data(std::string("cannot write summary next to ") + report_path);
        s << "evaluation of " << n << " scenes, config_hash "
          << hex16(mvb::config::config_hash(c)) << "\n";
        s << "metric        base (mean+/-std)      boosted (mean+/-std)   boosted wins\n";
        for (const Metric& m : metrics) {
            std::vector<double> bs, os;
            int wins = 0;
            for (int i = 0; i < n; ++i) {
                const double b = base_evals[i].*m.field, o = boost_evals[i].*m.field;
                bs.push_back(b);
                os.push_back(o);
                wins += m.higher_better ? (o > b) : (o < b);
            }
            const MeanStd mb = mean_std(bs), mo = mean_std(os);
            char line[160];
            std::snprintf(line, sizeof line, "%-12s  %10.5f +/- %-8.5f %10.5f +/- %-8.5f %3d/%d\n",
                          m.name, mb.mean, mb.std, mo.mean, mo.std, wins, n);
            s << line;
        }
        s.flush();
        if (!s) mvb::fail_data(std::string("short write to summary next to ") + report_path);
    });
}

MVB_API mvb_status mvb_ablate_strength(const mvb_config* cfg, const char* base_checkpoint,
                                       const double* strengths, int count,
                                       const char* report_path) {
    return guarded([&] {
        const auto& c = checked(cfg);
        require(base_checkpoint, "base_checkpoint");
        require(report_path, "report_path");
        std::vector<double> grid;
        if (strengths == nullptr) {
            grid = c.ablate_strengths;
        } else {
            if (count < 1) mvb::fail_param("strength count must be >= 1");
            grid.assign(strengths, strengths + count);
            for (double s : grid)
                if (!(s >= 0.0 && s <= 1.0))
                    mvb::fail_param("strengths must lie in [0, 1], got " + std::to_string(s));
        }
        const mvb::recon::ReconstructorParams base =
            mvb::recon::load_base_checkpoint(base_checkpoint, c.model);
        const mvb::CanonicalRig rig = mvb::make_canonical_rig(c.rig_extent);
        const mvb::NoiseSchedule sched = mvb::build_schedule(c.schedule_T, c.schedule_kind);

        const int scenes = c.ablate_scenes;
        const int ns = static_cast<int>(grid.size());
        // accum[si] over scenes and side views (the front view is the exact
        // conditioning image, so its capped PSNR would only flatten the
        // comparison).
        std::vector<std::vector<double>> ps(ns), ss(ns), pc(ns);
        for (auto* v : {&ps, &ss, &pc})
            for (auto& x : *v) x.assign(scenes, 0.0);

        parallel_for(scenes, [&](int i) {
            const std::uint64_t seed = c.ablate_seed + static_cast<std::uint64_t>(i);
            const mvb::SceneSpec spec = mvb::config::scene_spec(c, seed);
            const mvb::GaussianScene gt = mvb::generate_scene(spec);
            const mvb::MultiViewSet gt_views = mvb::render_rig_views(gt, rig, c.resolution);
            mvb::Rng mv_rng(seed * 7 + 1);
            const mvb::MultiViewSet inputs =
                mvb::mv_generate(gt_views.views[0], gt, rig, c.inconsistency, mv_rng);
            const mvb::GaussianScene theta = mvb::recon::forward(inputs, base, nullptr);
            const mvb::MultiViewSet renders = mvb::render_rig_views(theta, rig, c.resolution);
            for (int si = 0; si < ns; ++si) {
                mvb::RefineConfig rc;
                rc.strength = grid[si];
                rc.steps = c.refine_steps;
                rc.seed = seed * 7 + 2;  // shared across strengths: paired sweep
                mvb::OracleDenoiser den(gt_views, c.oracle, seed * 7 + 3);
                const mvb::MultiViewSet refined =
                    mvb::refine(renders, gt_views.views[0], rc, sched, den);
                double p = 0, q = 0, r = 0;
                for (size_t v = 1; v < refined.size(); ++v) {
                    p += mvb::psnr(refined.views[v], gt_views.views[v]);
                    q += mvb::ssim(refined.views[v], gt_views.views[v]);
                    r += mvb::perceptual_proxy(refined.views[v], gt_views.views[v],
                                               c.perceptual_resolution);
                }
                const double m = static_cast<double>(refined.size() - 1);
                ps[si][i] = p / m;
                ss[si][i] = q / m;
                pc[si][i] = r / m;
            }
        });

        std::vector<double> mean_psnr(ns), mean_ssim(ns), mean_perc(ns);
        for (int si = 0; si < ns; ++si) {
            mean_psnr[si] = mean_std(ps[si]).mean;
            mean_ssim[si] = mean_std(ss[si]).mean;
            mean_perc[si] = mean_std(pc[si]).mean;
        }
        int best = 0;
        for (int si = 1; si < ns; ++si)
            if (mean_psnr[si] > mean_psnr[best]) best = si;

        std::ofstream f(report_path, std::ios::trunc);
        if (!f) mvb::fail_data(std::string("cannot write report: ") + report_path);
        f << "# config_hash=" << hex16(mvb::config::config_hash(c))
          << " ablate_seed=" << c.ablate_seed << " scenes=" << scenes
          << " best_psnr_strength=" << fmt(grid[best]) << "\n";
        f << "strength,psnr,ssim,perc\n";
        for (int si = 0; si < ns; ++si)
            f << fmt(grid[si]) << "," << fmt(mean_psnr[si]) << "," << fmt(mean_ssim[si]) << ","
              << fmt(mean_perc[si]) << "\n";
        f.flush();
        if (!f) mvb::fail_data(std::string("short write to report: ") + report_path);

        std::ofstream s(std::string(report_path) + ".summary.txt", std::ios::trunc);
        if (!s) mvb::fail_data(std::string("cannot write summary next to ") + report_path);
        s << "refinement-strength sweep over " << scenes << " scenes (side views vs ground truth)\n";
        for (int si = 0; si < ns; ++si) {
            char line[120];
            std::snprintf(line, sizeof line, "  strength %.2f  psnr %8.3f  ssim %.4f  perc %.6f%s\n",
                          grid[si], mean_psnr[si], mean_ssim[si], mean_perc[si],
                          si == best ? "   <-- best PSNR" : "");
            s << line;
        }
        s.flush();
        if (!s) mvb::fail_data(std::string("short write to summary next to ") + report_path);
    });
}

MVB_API mvb_status mvb_optimize_view(const mvb_config* cfg, const char* base_checkpoint,
                                     const char* adapter_checkpoint, const char* input_png,
                                     const char* out_dir) {
    return guarded([&] {
        const auto& c = checked(cfg);
        require(base_checkpoint, "base_checkpoint");
        require(input_png, "input_png");
        require(out_dir, "out_dir");
        const mvb::Image input = mvb::load_png(input_png);
        if (input.width != c.resolution || input.height != c.resolution)
            mvb::fail_config("input image is " + std::to_string(input.width) + "x" +
                             std::to_string(input.height) + " but the configured resolution is " +
                             std::to_string(c.resolution));
        const fs::path scene_dir = fs::path(input_png).parent_path();
        const fs::path mpath = scene_dir / "manifest.txt";
        const fs::path spath = scene_dir / "scene.txt";
        if (!fs::exists(mpath) || !fs::exists(spath))
            mvb::fail_data("input_png must live inside a scene directory produced by gen-scenes "
                           "(missing manifest.txt or scene.txt in " +
                           scene_dir.string() + ")");
        auto kv = read_manifest(mpath);
        if (need(kv, "format", mpath) != "MVB-SCv1")
            mvb::fail_data("manifest " + mpath.string() + ": unknown format");
        const mvb::SceneSpec spec = spec_from_scene_manifest(kv, mpath);
        const mvb::GaussianScene gt = mvb::load_scene(spath.string());

        const mvb::recon::ReconstructorParams base =
            mvb::recon::load_base_checkpoint(base_checkpoint, c.model);
        std::unique_ptr<mvb::recon::LoraParams> lora;
        if (adapter_checkpoint != nullptr)
            lora = std::make_unique<mvb::recon::LoraParams>(
                mvb::recon::load_lora_checkpoint(adapter_checkpoint, c.model));

        const mvb::CanonicalRig rig = mvb::make_canonical_rig(c.rig_extent);
        const mvb::MultiViewSet gt_views = mvb::render_rig_views(gt, rig, c.resolution);
        const std::uint64_t mv_seed = spec.seed * 7 + 5;
        mvb::Rng mv_rng(mv_seed);
        const mvb::MultiViewSet inputs =
            mvb::mv_generate(gt_views.views[0], gt, rig, c.inconsistency, mv_rng);
        const mvb::GaussianScene theta = mvb::recon::forward(inputs, base, lora.get());

        mvb::viewopt::PoseSearchConfig pcfg;
        pcfg.perceptual_resolution = c.viewopt_perceptual_resolution;
        pcfg.ortho_half_extent = c.rig_extent;
        const mvb::viewopt::PoseSearchResult found =
            mvb::viewopt::pose_search(theta, input, pcfg);

        const mvb::viewopt::ResidualOptConfig rcfg = mvb::config::to_viewopt_config(c);
        const mvb::viewopt::ResidualOutcome outcome =
            mvb::viewopt::optimize_residual(theta, found.pose, input, rcfg, &gt_views);

        fs::create_directories(out_dir);
        mvb::viewopt::write_residual_report(out_dir, theta, outcome, c.resolution);
        mvb::save_scene(theta, (fs::path(out_dir) / "reconstructed_scene.txt").string());
        mvb::save_scene(outcome.optimized,
                        (fs::path(out_dir) / "optimized_scene.txt").string());
        write_manifest(fs::path(out_dir) / "manifest.txt",
                       {{"format", "MVB-VOv1"},
                        {"config_hash", hex16(mvb::config::config_hash(c))},
                        {"input_png", fs::path(input_png).string()},
                        {"scene_seed", std::to_string(spec.seed)},
                        {"mv_seed", std::to_string(mv_seed)},
                        {"adapter", adapter_checkpoint ? adapter_checkpoint : ""},
                        {"pose_azimuth_deg", fmt(found.pose.azimuth_deg)},
                        {"pose_elevation_deg", fmt(found.pose.elevation_deg)},
                        {"dist_before", fmt(outcome.report.dist_before)},
                        {"dist_after", fmt(outcome.report.dist_after)},
                        {"iters_run", std::to_string(outcome.report.iters_run)},
                        {"diverged", outcome.report.diverged ? "1" : "0"}});
    });
}

}  // extern "C"
