#include "finn/model/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "finn/error.hpp"

namespace finn {

namespace {

constexpr std::array<char, 8> kMagic = {'F', 'I', 'N', 'N', 'C', 'K', 'P', 'T'};

struct TensorShape {
    const char* name;
    std::uint32_t rows;
    std::uint32_t cols;
};

constexpr std::array<TensorShape, 6> kShapes = {{
    {"w1", MlpParams::kHidden, MlpParams::kInputs},
    {"b1", MlpParams::kHidden, 1},
    {"w2", MlpParams::kHidden, MlpParams::kHidden},
    {"b2", MlpParams::kHidden, 1},
    {"w3", 1, MlpParams::kHidden},
    {"b3", 1, 1},
}};

class Writer {
public:
    void u32(std::uint32_t v) { le(v, 4); }
    void u64(std::uint64_t v) { le(v, 8); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes_.insert(bytes_.end(), s.begin(), s.end());
    }
    void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
    const std::vector<char>& bytes() const { return bytes_; }

private:
    void le(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    std::vector<char> bytes_;
};

class Reader {
public:
    explicit Reader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

    std::uint32_t u32(const char* field) { return static_cast<std::uint32_t>(le(4, field)); }
    std::uint64_t u64(const char* field) { return le(8, field); }
    double f64(const char* field) { return std::bit_cast<double>(u64(field)); }
    std::string str(const char* field) {
        const std::uint32_t n = u32(field);
        need(n, field);
        std::string s(bytes_.data() + pos_, n);
        pos_ += n;
        return s;
    }
    void raw(char* out, std::size_t n, const char* field) {
        need(n, field);
        std::memcpy(out, bytes_.data() + pos_, n);
        pos_ += n;
    }
    bool at_end() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n, const char* field) {
        if (bytes_.size() - pos_ < n) {
            throw FormatError(std::string("checkpoint truncated while reading ") + field);
        }
    }
    std::uint64_t le(int n, const char* field) {
        need(static_cast<std::size_t>(n), field);
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        }
        pos_ += static_cast<std::size_t>(n);
        return v;
    }
    std::vector<char> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const MlpParams& params, const std::filesystem::path& path) {
    Writer w;
    w.raw(kMagic.data(), kMagic.size());
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(kShapes.size()));
    for (const auto& s : kShapes) {
        w.str(s.name);
        w.u32(s.rows);
        w.u32(s.cols);
    }
    w.u64(params.meta.seed);
    w.u32(params.meta.epoch);
    w.str(params.meta.process);
    w.str(params.meta.loss);
    w.str(to_string(params.meta.kind));
    const auto theta = params.values();
    w.u64(theta.size());
    for (double v : theta) w.f64(v);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open checkpoint for writing: " + path.string());
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw FormatError("failed writing checkpoint: " + path.string());
}

MlpParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open checkpoint: " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Reader r(std::move(bytes));

    std::array<char, 8> magic{};
    r.raw(magic.data(), magic.size(), "magic");
    if (magic != kMagic) throw FormatError("checkpoint: bad magic (not a checkpoint file)");
    const std::uint32_t version = r.u32("version");
    if (version != kCheckpointVersion) {
        throw FormatError("checkpoint: unsupported version " + std::to_string(version) +
                          " (expected " + std::to_string(kCheckpointVersion) + ")");
    }
    const std::uint32_t n_tensors = r.u32("tensor count");
    if (n_tensors != kShapes.size()) {
        throw FormatError("checkpoint: tensor count " + std::to_string(n_tensors) +
                          " does not match the network");
    }
    for (const auto& s : kShapes) {
        const std::string name = r.str("tensor name");
        const std::uint32_t rows = r.u32("tensor rows");
        const std::uint32_t cols = r.u32("tensor cols");
        if (name != s.name || rows != s.rows || cols != s.cols) {
            throw FormatError("checkpoint: shape mismatch for " + std::string(s.name) + " (file has " +
                              name + " " + std::to_string(rows) + "x" + std::to_string(cols) + ")");
        }
    }
    MlpParams params;
    params.meta.seed = r.u64("seed");
    params.meta.epoch = r.u32("epoch");
    params.meta.process = r.str("process tag");
    params.meta.loss = r.str("loss tag");
    const std::string kind = r.str("option kind");
    if (kind != "call" && kind != "put") throw FormatError("checkpoint: bad option kind " + kind);
    params.meta.kind = kind == "call" ? OptionKind::call : OptionKind::put;
    const std::uint64_t count = r.u64("value count");
    if (count != MlpParams::kCount) {
        throw FormatError("checkpoint: value count " + std::to_string(count) + " (expected " +
                          std::to_string(MlpParams::kCount) + ")");
    }
    auto theta = params.values();
    for (auto& v : theta) v = r.f64("parameter values");
    if (!r.at_end()) throw FormatError("checkpoint: trailing bytes after parameter values");
    return params;
}

}  // namespace finn
