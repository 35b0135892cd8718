#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <utility>
#include <vector>

#include "sisa/learner.hpp"

namespace sisa {

// Checkpoint file layout, little-endian:
//   "SISA" magic (4) | version u16 = 1 | mode u8 | shard u16 | slice u16 |
//   bottleneck u16 (0 unless Adapter) | param_count u64 |
//   payload: param_count x f32 | trained_id_digest u64 | payload_digest u64
// payload_digest is FNV-1a over the raw payload bytes and is verified on read.
inline constexpr int64_t kCheckpointHeaderBytes = 21;
inline constexpr int64_t kCheckpointTrailerBytes = 16;
inline constexpr int64_t kCheckpointOverheadBytes =
    kCheckpointHeaderBytes + kCheckpointTrailerBytes;
inline constexpr uint16_t kCheckpointVersion = 1;

// Snapshot of the trainable parameters after one slice step.
struct Checkpoint {
    int shard = 0;
    int slice = 0;  // state after training slice step `slice`
    HeadMode mode;
    std::vector<float> payload;       // trainable blocks in declared order
    uint64_t trained_id_digest = 0;   // FNV-1a over the sorted ids seen so far

    int64_t file_bytes() const {
        return kCheckpointOverheadBytes + 4 * static_cast<int64_t>(payload.size());
    }
};

uint64_t digest_payload(const std::vector<float>& payload);
uint64_t digest_sorted_ids(std::vector<uint64_t> ids);

struct StorageEntry {
    int64_t num_checkpoints = 0;
    int64_t total_bytes = 0;
};

// Directory of shard<S>_slice<R>.ckpt files with atomic replacement
// (write-to-temp, then rename). Concurrent put/get on distinct keys is safe.
class CheckpointStore {
public:
    explicit CheckpointStore(std::filesystem::path root);

    void put(const Checkpoint& cp);
    Checkpoint get(int shard, int slice) const;
    bool contains(int shard, int slice) const;

    std::map<HeadMode::Kind, StorageEntry> storage_report() const;
    int64_t total_bytes() const;
    size_t size() const;
    const std::filesystem::path& root() const { return root_; }

    std::filesystem::path path_for(int shard, int slice) const;

private:
    struct IndexEntry {
        HeadMode::Kind mode;
        int64_t bytes;
    };

    std::filesystem::path root_;
    std::map<std::pair<int, int>, IndexEntry> index_;
    mutable std::mutex mutex_;
};

// Reads/writes a bare model file (same layout, shard field = shard id,
// slice field = 0xFFFF) for the per-shard final models.
void write_model_file(const std::filesystem::path& path, int shard, const ModelParams& params);
Checkpoint read_checkpoint_file(const std::filesystem::path& path);

}  // namespace sisa
