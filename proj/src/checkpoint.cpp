#include "unitbox/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "unitbox/run_config.hpp"

namespace unitbox {

namespace {

constexpr char kMagic[8] = {'U', 'N', 'I', 'T', 'B', 'O', 'X', '\0'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

void put_bytes(std::vector<std::uint8_t>& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
}

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(bytes_[pos_ + k]) << (8 * k);
        pos_ += 4;
        return v;
    }

    std::string bytes(std::size_t n) {
        need(n);
        std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                      bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
        pos_ += n;
        return s;
    }

    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw CheckpointError("checkpoint truncated");
    }

    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    put_u32(out, kCheckpointVersion);
    put_bytes(out, ckpt.meta.dump());
    put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& t : ckpt.tensors) {
        put_bytes(out, t.name);
        const Shape& s = t.value.shape();
        put_u32(out, 4);
        for (int d : {s.n, s.c, s.h, s.w}) put_u32(out, static_cast<std::uint32_t>(d));
        for (double v : t.value.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    return out;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    Reader r(bytes);
    if (r.bytes(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) throw CheckpointError("not a checkpoint (bad magic)");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint ckpt;
    try {
        ckpt.meta = nlohmann::ordered_json::parse(r.bytes(r.u32()));
    } catch (const nlohmann::json::parse_error& e) {
        throw CheckpointError(std::string("checkpoint metadata: ") + e.what());
    }
    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = r.bytes(r.u32());
        const std::uint32_t rank = r.u32();
        if (rank != 4) throw CheckpointError("tensor '" + name + "': unsupported rank " + std::to_string(rank));
        int dims[4];
        for (int& d : dims) d = static_cast<int>(r.u32());
        Tensor t(Shape{dims[0], dims[1], dims[2], dims[3]});
        for (double& v : t.data()) v = static_cast<double>(std::bit_cast<float>(r.u32()));
        ckpt.tensors.push_back({std::move(name), std::move(t)});
    }
    if (!r.done()) throw CheckpointError("trailing bytes after last tensor");
    return ckpt;
}

void write_checkpoint(const std::filesystem::path& file, const Checkpoint& ckpt) {
    const auto bytes = encode_checkpoint(ckpt);
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError(file.string() + ": cannot open for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError(file.string() + ": write failed");
}

Checkpoint read_checkpoint(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw CheckpointError(file.string() + ": cannot open checkpoint");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode_checkpoint(bytes);
    } catch (const CheckpointError& e) {
        throw CheckpointError(file.string() + ": " + e.what());
    }
}

std::vector<NamedTensor> round_to_f32(std::vector<NamedTensor> tensors) {
    for (auto& t : tensors) {
        for (double& v : t.value.data()) v = static_cast<double>(static_cast<float>(v));
    }
    return tensors;
}

Checkpoint make_checkpoint(const UnitBoxNet& net, nlohmann::ordered_json extra_meta) {
    Checkpoint ckpt;
    ckpt.meta = nlohmann::ordered_json::object();
    ckpt.meta["network"] = to_json(net.config());
    for (auto it = extra_meta.begin(); it != extra_meta.end(); ++it) ckpt.meta[it.key()] = it.value();
    ckpt.tensors = net.export_parameters();
    return ckpt;
}

UnitBoxNet network_from_checkpoint(const Checkpoint& ckpt) {
    if (!ckpt.meta.contains("network")) throw CheckpointError("checkpoint metadata lacks 'network'");
    NetworkConfig cfg;
    try {
        cfg = network_config_from_json(ckpt.meta["network"]);
    } catch (const ConfigError& e) {
        throw CheckpointError(std::string("checkpoint metadata: ") + e.what());
    }
    UnitBoxNet net(cfg);
    try {
        net.import_parameters(ckpt.tensors);
    } catch (const std::invalid_argument& e) {
        throw CheckpointError(std::string("checkpoint tensors: ") + e.what());
    }
    return net;
}

UnitBoxNet load_network(const std::filesystem::path& file) { return network_from_checkpoint(read_checkpoint(file)); }

}  // namespace unitbox
