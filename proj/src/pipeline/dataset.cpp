#include "pipeline/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "core/error.hpp"
#include "core/image.hpp"

namespace fs = std::filesystem;

namespace mvb::pipeline {

namespace {

std::uint64_t fnv_mix(std::uint64_t h, const void* data, size_t bytes) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t fnv_str(std::uint64_t h, const std::string& s) { return fnv_mix(h, s.data(), s.size()); }

std::uint64_t derive_seed(std::uint64_t root, const char* tag, std::uint64_t n) {
    std::uint64_t h = 1469598103934665603ull;
    h = fnv_mix(h, &root, sizeof root);
    h = fnv_str(h, tag);
    h = fnv_mix(h, &n, sizeof n);
    return h;
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string scene_dir_name(const SceneSpec& spec) { return "s" + std::to_string(spec.seed); }

std::string palette_string(const std::vector<Vec3>& palette) {
    std::string out;
    for (size_t i = 0; i < palette.size(); ++i) {
        if (i) out += ";";
        out += fmt_double(palette[i].x) + "," + fmt_double(palette[i].y) + "," +
               fmt_double(palette[i].z);
    }
    return out;
}

std::vector<Vec3> parse_palette(const std::string& s) {
    std::vector<Vec3> out;
    if (s.empty()) return out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ';')) {
        Vec3 c;
        if (std::sscanf(item.c_str(), "%lf,%lf,%lf", &c.x, &c.y, &c.z) != 3)
            fail_data("manifest: bad palette entry '" + item + "'");
        out.push_back(c);
    }
    return out;
}

std::map<std::string, std::string> read_manifest(const fs::path& path) {
    std::ifstream f(path);
    if (!f) fail_data("cannot open manifest: " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) fail_data("manifest: malformed line '" + line + "'");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

const std::string& need(const std::map<std::string, std::string>& kv, const std::string& key,
                        const fs::path& path) {
    auto it = kv.find(key);
    if (it == kv.end()) fail_data("manifest " + path.string() + " is missing key '" + key + "'");
    return it->second;
}

std::vector<std::string> view_file_names(const char* prefix) {
    std::vector<std::string> out;
    for (int v = 0; v < kRigViews; ++v)
        out.push_back(std::string(prefix) + "_" + kRigLabels[static_cast<size_t>(v)] + ".png");
    return out;
}

void write_views(const MultiViewSet& mvs, const fs::path& dir, const char* prefix) {
    auto names = view_file_names(prefix);
    for (int v = 0; v < kRigViews; ++v)
        save_png(mvs.views[static_cast<size_t>(v)], (dir / names[static_cast<size_t>(v)]).string());
}

MultiViewSet read_views(const fs::path& dir, const char* prefix, const CanonicalRig& rig,
                        MultiViewSet::Stage stage) {
    MultiViewSet mvs;
    mvs.stage = stage;
    auto names = view_file_names(prefix);
    for (int v = 0; v < kRigViews; ++v) {
        mvs.poses.push_back(rig.poses[static_cast<size_t>(v)]);
        mvs.views.push_back(load_png((dir / names[static_cast<size_t>(v)]).string()));
    }
    mvs.condition = mvs.views[0];
    return mvs;
}

bool files_equal(const fs::path& a, const fs::path& b) {
    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    if (!fa || !fb) return false;
    std::vector<char> da((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::vector<char> db((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    return da == db;
}

RefinedPair pair_from_manifest(const fs::path& scene_dir) {
    const fs::path mpath = scene_dir / "manifest.txt";
    auto kv = read_manifest(mpath);
    if (need(kv, "format", mpath) != "MVB-DSv1")
        fail_data("manifest " + mpath.string() + ": unknown format");
    RefinedPair pair;
    pair.scene_id = need(kv, "scene_id", mpath);
    pair.spec.seed = std::stoull(need(kv, "scene_seed", mpath));
    pair.spec.primitive_count = std::stoi(need(kv, "primitive_count", mpath));
    pair.spec.palette = parse_palette(kv.count("palette") ? kv.at("palette") : "");
    pair.seeds.mv = std::stoull(need(kv, "mv_seed", mpath));
    pair.seeds.refine = std::stoull(need(kv, "refine_seed", mpath));
    pair.seeds.oracle = std::stoull(need(kv, "oracle_seed", mpath));
    const double extent = std::stod(need(kv, "extent", mpath));
    const CanonicalRig rig = make_canonical_rig(extent);
    pair.inputs = read_views(scene_dir, "input", rig, MultiViewSet::Stage::generated);
    pair.targets = read_views(scene_dir, "target", rig, MultiViewSet::Stage::refined);
    const int res = std::stoi(need(kv, "resolution", mpath));
    for (const Image& img : pair.inputs.views)
        if (img.width != res || img.height != res)
            fail_data("dataset " + scene_dir.string() + ": stored view resolution mismatch");
    return pair;
}

}  // namespace

std::uint64_t dataset_config_hash(const DatasetBuildConfig& cfg) {
    std::uint64_t h = 1469598103934665603ull;
    auto mixd = [&h](double v) { h = fnv_mix(h, &v, sizeof v); };
    auto mixi = [&h](std::int64_t v) { h = fnv_mix(h, &v, sizeof v); };
    mixd(cfg.inc.color_shift_amp);
    mixd(cfg.inc.warp_amp);
    mixd(cfg.inc.silhouette_noise_amp);
    mixd(cfg.refine.strength);
    mixi(cfg.refine.steps);
    mixd(cfg.oracle.eta);
    mixd(cfg.oracle.kappa);
    mixd(cfg.oracle.knee);
    mixi(cfg.schedule_T);
    mixi(static_cast<std::int64_t>(cfg.schedule_kind));
    mixi(cfg.resolution);
    mixd(cfg.rig_extent);
    h = fnv_mix(h, &cfg.seed, sizeof cfg.seed);
    return h;
}

RefinedPair build_pair(const SceneSpec& spec, const PairSeeds& seeds,
                       const DatasetBuildConfig& cfg, const recon::ReconstructorParams& base) {
    RefinedPair pair;
    pair.scene_id = scene_dir_name(spec);
    pair.spec = spec;
    pair.seeds = seeds;

    const GaussianScene scene = generate_scene(spec);
    const CanonicalRig rig = make_canonical_rig(cfg.rig_extent);
    const MultiViewSet gt = render_rig_views(scene, rig, cfg.resolution);
    const Image& condition = gt.views[0];

    Rng mv_rng(seeds.mv);
    pair.inputs = mv_generate(condition, scene, rig, cfg.inc, mv_rng);

    const GaussianScene theta = recon::forward(pair.inputs, base);
    const MultiViewSet renders = render_rig_views(theta, rig, cfg.resolution);

    const NoiseSchedule sched = build_schedule(cfg.schedule_T, cfg.schedule_kind);
    OracleDenoiser den(gt, cfg.oracle, seeds.oracle);
    RefineConfig rc = cfg.refine;
    rc.seed = seeds.refine;
    pair.targets = refine(renders, condition, rc, sched, den);
    // At strength 0 refine hands the render set back untouched, stage tag
    // included; as dataset targets they are always the refined stage.
    pair.targets.stage = MultiViewSet::Stage::refined;
    return pair;
}

namespace {

void persist_pair(const RefinedPair& pair, const DatasetBuildConfig& cfg, const fs::path& dir) {
    fs::create_directories(dir);
    write_views(pair.inputs, dir, "input");
    write_views(pair.targets, dir, "target");
    // The manifest is written last: its presence marks the pair as complete.
    std::ofstream f(dir / "manifest.txt", std::ios::trunc);
    if (!f) fail_data("cannot write manifest in " + dir.string());
    f << "format=MVB-DSv1\n";
    f << "scene_id=" << pair.scene_id << "\n";
    f << "scene_seed=" << pair.spec.seed << "\n";
    f << "primitive_count=" << pair.spec.primitive_count << "\n";
    if (!pair.spec.palette.empty()) f << "palette=" << palette_string(pair.spec.palette) << "\n";
    f << "mv_seed=" << pair.seeds.mv << "\n";
    f << "refine_seed=" << pair.seeds.refine << "\n";
    f << "oracle_seed=" << pair.seeds.oracle << "\n";
    f << "config_hash=" << dataset_config_hash(cfg) << "\n";
    f << "resolution=" << cfg.resolution << "\n";
    f << "extent=" << fmt_double(cfg.rig_extent) << "\n";
    f << "views=" << kRigViews << "\n";
    if (!f) fail_data("short write to manifest in " + dir.string());
}

}  // namespace

std::vector<RefinedPair> build_refined_dataset(const std::vector<SceneSpec>& specs,
                                               const DatasetBuildConfig& cfg,
                                               const recon::ReconstructorParams& base,
                                               const std::string& out_dir) {
    if (specs.empty()) fail_param("build_refined_dataset: empty scene list");
    fs::create_directories(out_dir);
    for (const SceneSpec& spec : specs) {
        const fs::path dir = fs::path(out_dir) / scene_dir_name(spec);
        if (fs::exists(dir / "manifest.txt")) {
            auto kv = read_manifest(dir / "manifest.txt");
            if (kv.count("config_hash") &&
                kv.at("config_hash") == std::to_string(dataset_config_hash(cfg)))
                continue;  // already built under this configuration
        }
        PairSeeds seeds;
        seeds.mv = derive_seed(cfg.seed, "mv", spec.seed);
        seeds.refine = derive_seed(cfg.seed, "refine", spec.seed);
        seeds.oracle = derive_seed(cfg.seed, "oracle", spec.seed);
        RefinedPair pair = build_pair(spec, seeds, cfg, base);
        persist_pair(pair, cfg, dir);
    }
    return load_refined_dataset(out_dir);
}

std::vector<RefinedPair> load_refined_dataset(const std::string& dir) {
    if (!fs::is_directory(dir)) fail_data("dataset directory does not exist: " + dir);
    std::vector<RefinedPair> pairs;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_directory()) continue;
        if (!fs::exists(entry.path() / "manifest.txt")) continue;
        pairs.push_back(pair_from_manifest(entry.path()));
    }
    if (pairs.empty()) fail_data("no complete scene pairs under " + dir);
    std::sort(pairs.begin(), pairs.end(),
              [](const RefinedPair& a, const RefinedPair& b) { return a.spec.seed < b.spec.seed; });
    return pairs;
}

bool verify_dataset_replay(const std::string& dir, const DatasetBuildConfig& cfg,
                           const recon::ReconstructorParams& base) {
    std::vector<RefinedPair> pairs = load_refined_dataset(dir);
    bool ok = true;
    for (const RefinedPair& stored : pairs) {
        RefinedPair rebuilt = build_pair(stored.spec, stored.seeds, cfg, base);
        const fs::path sdir = fs::path(dir) / stored.scene_id;
        const fs::path tmp = sdir / ".replay_tmp.png";
        auto check_set = [&](const MultiViewSet& mvs, const char* prefix) {
            auto names = view_file_names(prefix);
            for (int v = 0; v < kRigViews; ++v) {
                save_png(mvs.views[static_cast<size_t>(v)], tmp.string());
                if (!files_equal(tmp, sdir / names[static_cast<size_t>(v)])) ok = false;
            }
        };
        check_set(rebuilt.inputs, "input");
        check_set(rebuilt.targets, "target");
        std::error_code ec;
        fs::remove(tmp, ec);
    }
    return ok;
}

}  // namespace mvb::pipeline
