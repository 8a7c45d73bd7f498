#include "ctt/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ctt/common.hpp"

namespace ctt {
namespace {

constexpr char kMagic[] = "CTTCKPT\n";
constexpr std::size_t kMagicLen = 8;

std::uint64_t fnv1a(const char* data, std::size_t n) {
    std::uint64_t h = 1469598103934665603ull;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= static_cast<unsigned char>(data[i]);
        h *= 1099511628211ull;
    }
    return h;
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, double v) {
    const float f = static_cast<float>(v);
    std::uint32_t bits = 0;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
}

struct Reader {
    const std::string& buf;
    std::size_t pos;
    std::string context;  // manifest details once parsed, for error messages

    void need(std::size_t n) const {
        if (pos + n > buf.size()) {
            throw DataError("checkpoint truncated at byte " + std::to_string(pos) + context);
        }
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        }
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        }
        pos += 8;
        return v;
    }
    double f32() {
        const std::uint32_t bits = u32();
        float f = 0.0f;
        std::memcpy(&f, &bits, 4);
        return static_cast<double>(f);
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
    nlohmann::ordered_json manifest;
    manifest["format"] = ck.format;
    manifest["iteration"] = ck.iteration;
    nlohmann::ordered_json rng = nlohmann::ordered_json::object();
    for (const auto& [name, state] : ck.rng_states) rng[name] = state;
    manifest["rng"] = rng;
    manifest["config"] = ck.config_text;
    const std::string mtext = manifest.dump();

    std::string payload;
    put_u64(payload, mtext.size());
    payload += mtext;

    put_u32(payload, static_cast<std::uint32_t>(ck.tensors.size()));
    for (const auto& [name, tensor] : ck.tensors) {
        put_u32(payload, static_cast<std::uint32_t>(name.size()));
        payload += name;
        put_u32(payload, static_cast<std::uint32_t>(tensor.dims().size()));
        for (int d : tensor.dims()) put_u32(payload, static_cast<std::uint32_t>(d));
        for (std::size_t i = 0; i < tensor.numel(); ++i) put_f32(payload, tensor[i]);
    }

    put_u32(payload, static_cast<std::uint32_t>(ck.banks.size()));
    for (const auto& bank : ck.banks) {
        put_u32(payload, static_cast<std::uint32_t>(bank.num_classes));
        put_u32(payload, static_cast<std::uint32_t>(bank.capacity));
        put_u32(payload, static_cast<std::uint32_t>(bank.dim));
        for (const auto& queue : bank.queues) {
            put_u32(payload, static_cast<std::uint32_t>(queue.size()));
            for (const auto& vec : queue) {
                for (double v : vec) put_f32(payload, v);
            }
        }
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open checkpoint for writing: " + path.string());
    out.write(kMagic, static_cast<std::streamsize>(kMagicLen));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    std::string tail;
    put_u64(tail, fnv1a(payload.data(), payload.size()));
    out.write(tail.data(), static_cast<std::streamsize>(tail.size()));
    if (!out) throw DataError("write failed for checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path.string());
    std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (raw.size() < kMagicLen + 8 || raw.compare(0, kMagicLen, kMagic, kMagicLen) != 0) {
        throw DataError("not a checkpoint file (bad magic): " + path.string());
    }
    const std::size_t payload_len = raw.size() - kMagicLen - 8;
    Reader r{raw, kMagicLen, ""};

    const std::uint64_t mlen = r.u64();
    const std::string mtext = r.bytes(static_cast<std::size_t>(mlen));

    Checkpoint ck;
    try {
        const auto manifest = nlohmann::ordered_json::parse(mtext);
        ck.format = manifest.at("format").get<std::string>();
        ck.iteration = manifest.at("iteration").get<long long>();
        for (const auto& [name, state] : manifest.at("rng").items()) {
            ck.rng_states.emplace_back(name, state.get<std::string>());
        }
        ck.config_text = manifest.at("config").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError("checkpoint manifest unreadable (" + std::string(e.what()) +
                        "): " + path.string());
    }
    r.context = " (manifest: format=" + ck.format + ", iteration=" + std::to_string(ck.iteration) + ")";
    if (ck.format != kCheckpointFormat) {
        throw DataError("unsupported checkpoint format \"" + ck.format + "\" (expected " +
                        kCheckpointFormat + "): " + path.string());
    }

    // Integrity before structure: a flipped byte should not parse as data.
    Reader tail{raw, kMagicLen + payload_len, r.context};
    const std::uint64_t stored = tail.u64();
    const std::uint64_t actual = fnv1a(raw.data() + kMagicLen, payload_len);
    if (stored != actual) {
        throw DataError("checkpoint checksum mismatch in " + path.string() + r.context);
    }

    const std::uint32_t tensor_count = r.u32();
    ck.tensors.reserve(tensor_count);
    for (std::uint32_t t = 0; t < tensor_count; ++t) {
        const std::uint32_t name_len = r.u32();
        std::string name = r.bytes(name_len);
        const std::uint32_t rank = r.u32();
        std::vector<int> dims(rank);
        std::size_t numel = 1;
        for (auto& d : dims) {
            d = static_cast<int>(r.u32());
            if (d < 0) throw DataError("checkpoint tensor with negative dim" + r.context);
            numel *= static_cast<std::size_t>(d);
        }
        Tensor tensor(dims);
        for (std::size_t i = 0; i < numel; ++i) tensor[i] = r.f32();
        ck.tensors.emplace_back(std::move(name), std::move(tensor));
    }

    const std::uint32_t bank_count = r.u32();
    for (std::uint32_t b = 0; b < bank_count; ++b) {
        const int num_classes = static_cast<int>(r.u32());
        const int capacity = static_cast<int>(r.u32());
        const int dim = static_cast<int>(r.u32());
        MemoryBank bank = new_bank(num_classes, capacity, dim);
        for (int cls = 0; cls < num_classes; ++cls) {
            const std::uint32_t count = r.u32();
            if (static_cast<int>(count) > capacity) {
                throw DataError("checkpoint bank queue exceeds capacity" + r.context);
            }
            for (std::uint32_t i = 0; i < count; ++i) {
                std::vector<double> vec(static_cast<std::size_t>(dim));
                for (auto& v : vec) v = r.f32();
                bank.queues[static_cast<std::size_t>(cls)].push_back(std::move(vec));
            }
        }
        ck.banks.push_back(std::move(bank));
    }

    if (r.pos != kMagicLen + payload_len) {
        throw DataError("checkpoint has trailing bytes" + r.context);
    }
    return ck;
}

}  // namespace ctt
