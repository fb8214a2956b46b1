#include "recon/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "core/error.hpp"

namespace mvb::recon {

namespace {

constexpr char kBaseMagic[8] = {'M', 'V', 'B', 'C', 'K', 'v', '1', '\n'};
constexpr char kLoraMagic[8] = {'M', 'V', 'B', 'L', 'R', 'v', '1', '\n'};

void put_u32(std::ofstream& f, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    f.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ofstream& f, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    f.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::ifstream& f, const std::string& path) {
    unsigned char b[4];
    if (!f.read(reinterpret_cast<char*>(b), 4)) fail_data("truncated checkpoint: " + path);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::ifstream& f, const std::string& path) {
    unsigned char b[8];
    if (!f.read(reinterpret_cast<char*>(b), 8)) fail_data("truncated checkpoint: " + path);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

void write_file(const std::string& path, const char magic[8], std::uint64_t cfg_hash,
                const std::vector<std::pair<std::string, grad::Tensor>>& arrays) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail_data("cannot open checkpoint for writing: " + path);
    f.write(magic, 8);
    put_u64(f, cfg_hash);
    put_u32(f, static_cast<std::uint32_t>(arrays.size()));
    for (const auto& [name, t] : arrays) {
        put_u32(f, static_cast<std::uint32_t>(name.size()));
        f.write(name.data(), static_cast<std::streamsize>(name.size()));
        const auto& sh = t.shape();
        put_u32(f, static_cast<std::uint32_t>(sh.size()));
        for (int d : sh) put_u32(f, static_cast<std::uint32_t>(d));
        static_assert(sizeof(double) == 8);
        f.write(reinterpret_cast<const char*>(t.data().data()),
                static_cast<std::streamsize>(t.data().size() * sizeof(double)));
    }
    if (!f) fail_data("short write to checkpoint: " + path);
}

std::map<std::string, grad::Tensor> read_file(const std::string& path, const char magic[8],
                                              std::uint64_t want_hash) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail_data("cannot open checkpoint: " + path);
    char got[8];
    if (!f.read(got, 8)) fail_data("truncated checkpoint: " + path);
    if (std::memcmp(got, magic, 8) != 0) fail_data("bad checkpoint magic in " + path);
    std::uint64_t h = get_u64(f, path);
    if (h != want_hash) fail_param("checkpoint " + path + " was written for a different model config");
    std::uint32_t count = get_u32(f, path);
    std::map<std::string, grad::Tensor> out;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint32_t len = get_u32(f, path);
        if (len > 4096) fail_data("implausible name length in " + path);
        std::string name(len, '\0');
        if (!f.read(name.data(), len)) fail_data("truncated checkpoint: " + path);
        std::uint32_t ndim = get_u32(f, path);
        if (ndim > 8) fail_data("implausible rank in " + path);
        std::vector<int> shape;
        size_t n = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            std::uint32_t dim = get_u32(f, path);
            shape.push_back(static_cast<int>(dim));
            n *= dim;
        }
        std::vector<double> vals(n);
        if (!f.read(reinterpret_cast<char*>(vals.data()),
                    static_cast<std::streamsize>(n * sizeof(double))))
            fail_data("truncated checkpoint: " + path);
        if (out.count(name)) fail_data("duplicate array '" + name + "' in " + path);
        out.emplace(name, grad::Tensor::from(std::move(shape), std::move(vals)));
    }
    return out;
}

// Copy loaded values into the destination tensor, verifying the shape.
void fill(std::map<std::string, grad::Tensor>& src, const std::string& name, grad::Tensor& dst,
          const std::string& path) {
    auto it = src.find(name);
    if (it == src.end()) fail_data("checkpoint " + path + " is missing array '" + name + "'");
    if (it->second.shape() != dst.shape())
        fail_data("checkpoint " + path + ": array '" + name + "' has the wrong shape");
    dst.data() = it->second.data();
    src.erase(it);
}

}  // namespace

void save_base_checkpoint(const std::string& path, const ReconstructorParams& params) {
    write_file(path, kBaseMagic, model_config_hash(params.cfg), named_base_params(params));
}

ReconstructorParams load_base_checkpoint(const std::string& path, const ModelConfig& cfg) {
    auto arrays = read_file(path, kBaseMagic, model_config_hash(cfg));
    // Seed value is irrelevant: every array is overwritten below.
    ReconstructorParams p = init_base_params(cfg, 0);
    for (auto& [name, t] : named_base_params(p)) {
        grad::Tensor dst = t;
        fill(arrays, name, dst, path);
    }
    if (!arrays.empty()) fail_data("checkpoint " + path + " has unexpected extra arrays");
    return p;
}

void save_lora_checkpoint(const std::string& path, const LoraParams& params) {
    write_file(path, kLoraMagic, model_config_hash(params.cfg), named_lora_params(params));
}

LoraParams load_lora_checkpoint(const std::string& path, const ModelConfig& cfg) {
    auto arrays = read_file(path, kLoraMagic, model_config_hash(cfg));
    LoraParams p = init_lora_params(cfg, 0);
    for (auto& [name, t] : named_lora_params(p)) {
        grad::Tensor dst = t;
        fill(arrays, name, dst, path);
    }
    if (!arrays.empty()) fail_data("checkpoint " + path + " has unexpected extra arrays");
    return p;
}

std::uint64_t params_digest(const ReconstructorParams& params) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* data, size_t bytes) {
        const unsigned char* p = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < bytes; ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    };
    for (const auto& [name, t] : named_base_params(params)) {
        mix(name.data(), name.size());
        mix(t.data().data(), t.data().size() * sizeof(double));
    }
    return h;
}

}  // namespace mvb::recon
