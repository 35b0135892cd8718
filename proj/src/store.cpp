#include "sisa/store.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "sisa/errors.hpp"
#include "sisa/rng.hpp"

namespace sisa {

uint64_t digest_payload(const std::vector<float>& payload) {
    return fnv1a_bytes(payload.data(), payload.size() * sizeof(float));
}

uint64_t digest_sorted_ids(std::vector<uint64_t> ids) {
    std::sort(ids.begin(), ids.end());
    uint64_t h = kFnvOffsetBasis;
    for (uint64_t id : ids) {
        h = fnv1a_u64(id, h);
    }
    return h;
}

namespace {

constexpr char kMagic[4] = {'S', 'I', 'S', 'A'};
constexpr uint16_t kModelSliceTag = 0xFFFF;

void append_u16(std::vector<unsigned char>& buf, uint16_t v) {
    buf.push_back(static_cast<unsigned char>(v));
    buf.push_back(static_cast<unsigned char>(v >> 8));
}

void append_u64(std::vector<unsigned char>& buf, uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
}

uint16_t read_u16(const unsigned char* p) {
    return static_cast<uint16_t>(p[0] | (static_cast<uint16_t>(p[1]) << 8));
}

uint64_t read_u64(const unsigned char* p) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= static_cast<uint64_t>(p[i]) << (8 * i);
    }
    return v;
}

std::vector<unsigned char> encode_checkpoint(const Checkpoint& cp, uint16_t slice_field) {
    std::vector<unsigned char> buf;
    buf.reserve(static_cast<size_t>(cp.file_bytes()));
    buf.insert(buf.end(), kMagic, kMagic + 4);
    append_u16(buf, kCheckpointVersion);
    buf.push_back(static_cast<unsigned char>(cp.mode.kind));
    append_u16(buf, static_cast<uint16_t>(cp.shard));
    append_u16(buf, slice_field);
    append_u16(buf, cp.mode.kind == HeadMode::Kind::Adapter
                        ? static_cast<uint16_t>(cp.mode.bottleneck)
                        : 0);
    append_u64(buf, static_cast<uint64_t>(cp.payload.size()));

    // f32 payload, little-endian via bit pattern.
    for (float f : cp.payload) {
        uint32_t bits;
        std::memcpy(&bits, &f, 4);
        for (int i = 0; i < 4; ++i) {
            buf.push_back(static_cast<unsigned char>(bits >> (8 * i)));
        }
    }
    append_u64(buf, cp.trained_id_digest);
    append_u64(buf, digest_payload(cp.payload));
    return buf;
}

void write_atomic(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw StoreError("cannot write " + tmp.string());
        }
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw StoreError("write failure on " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        throw StoreError("cannot replace " + path.string() + ": " + ec.message());
    }
}

Checkpoint decode_checkpoint(const std::vector<unsigned char>& buf,
                             const std::string& origin) {
    if (buf.size() < static_cast<size_t>(kCheckpointOverheadBytes) ||
        std::memcmp(buf.data(), kMagic, 4) != 0) {
        throw StoreError("not a checkpoint file: " + origin);
    }
    const unsigned char* p = buf.data() + 4;
    const uint16_t version = read_u16(p);
    p += 2;
    if (version != kCheckpointVersion) {
        throw StoreError("unsupported checkpoint version " + std::to_string(version) + " in " +
                         origin);
    }
    const uint8_t mode_byte = *p++;
    if (mode_byte > 2) {
        throw StoreError("bad mode byte in " + origin);
    }
    Checkpoint cp;
    cp.shard = read_u16(p);
    p += 2;
    cp.slice = read_u16(p);
    p += 2;
    const uint16_t bottleneck = read_u16(p);
    p += 2;
    cp.mode.kind = static_cast<HeadMode::Kind>(mode_byte);
    cp.mode.bottleneck = cp.mode.kind == HeadMode::Kind::Adapter ? bottleneck : 0;
    const uint64_t count = read_u64(p);
    p += 8;

    const size_t expected = static_cast<size_t>(kCheckpointOverheadBytes) + 4 * count;
    if (buf.size() != expected) {
        throw StoreError("truncated checkpoint (" + std::to_string(buf.size()) + " of " +
                         std::to_string(expected) + " bytes): " + origin);
    }
    cp.payload.resize(count);
    for (uint64_t i = 0; i < count; ++i) {
        uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) {
            bits |= static_cast<uint32_t>(*p++) << (8 * b);
        }
        std::memcpy(&cp.payload[i], &bits, 4);
    }
    cp.trained_id_digest = read_u64(p);
    p += 8;
    const uint64_t stored_digest = read_u64(p);
    if (stored_digest != digest_payload(cp.payload)) {
        throw StoreError("payload digest mismatch (corrupt checkpoint): " + origin);
    }
    return cp;
}

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw StoreError("cannot open " + path.string());
    }
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    return buf;
}

}  // namespace

CheckpointStore::CheckpointStore(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
    // Re-open an existing store: every well-formed file name joins the index.
    for (const auto& entry : std::filesystem::directory_iterator(root_)) {
        if (!entry.is_regular_file()) continue;
        int shard = 0, slice = 0;
        const std::string name = entry.path().filename().string();
        if (std::sscanf(name.c_str(), "shard%d_slice%d.ckpt", &shard, &slice) != 2) continue;
        const Checkpoint cp = decode_checkpoint(read_all(entry.path()), entry.path().string());
        index_[{shard, slice}] = IndexEntry{cp.mode.kind, cp.file_bytes()};
    }
}

std::filesystem::path CheckpointStore::path_for(int shard, int slice) const {
    return root_ / ("shard" + std::to_string(shard) + "_slice" + std::to_string(slice) + ".ckpt");
}

void CheckpointStore::put(const Checkpoint& cp) {
    const std::vector<unsigned char> bytes =
        encode_checkpoint(cp, static_cast<uint16_t>(cp.slice));
    write_atomic(path_for(cp.shard, cp.slice), bytes);
    std::lock_guard lock(mutex_);
    index_[{cp.shard, cp.slice}] = IndexEntry{cp.mode.kind, cp.file_bytes()};
}

Checkpoint CheckpointStore::get(int shard, int slice) const {
    {
        std::lock_guard lock(mutex_);
        if (!index_.contains({shard, slice})) {
            throw StoreError("no checkpoint for shard " + std::to_string(shard) + ", slice " +
                             std::to_string(slice));
        }
    }
    const std::filesystem::path path = path_for(shard, slice);
    return decode_checkpoint(read_all(path), path.string());
}

bool CheckpointStore::contains(int shard, int slice) const {
    std::lock_guard lock(mutex_);
    return index_.contains({shard, slice});
}

std::map<HeadMode::Kind, StorageEntry> CheckpointStore::storage_report() const {
    std::lock_guard lock(mutex_);
    std::map<HeadMode::Kind, StorageEntry> report;
    for (const auto& [key, entry] : index_) {
        StorageEntry& se = report[entry.mode];
        ++se.num_checkpoints;
        se.total_bytes += entry.bytes;
    }
    return report;
}

int64_t CheckpointStore::total_bytes() const {
    std::lock_guard lock(mutex_);
    int64_t total = 0;
    for (const auto& [key, entry] : index_) {
        total += entry.bytes;
    }
    return total;
}

size_t CheckpointStore::size() const {
    std::lock_guard lock(mutex_);
    return index_.size();
}

void write_model_file(const std::filesystem::path& path, int shard, const ModelParams& params) {
    Checkpoint cp;
    cp.shard = shard;
    cp.slice = 0;
    cp.mode = params.mode;
    cp.payload = trainable_payload(params);
    write_atomic(path, encode_checkpoint(cp, kModelSliceTag));
}

Checkpoint read_checkpoint_file(const std::filesystem::path& path) {
    return decode_checkpoint(read_all(path), path.string());
}

}  // namespace sisa
