#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

namespace cotsel {

enum class CacheKind { sampling, complexity, evaluation };

const char* cache_kind_name(CacheKind kind);

/// Addresses one append-only record file. The digest is a stable hash of the
/// canonically serialized key, so the same parameters land in the same store
/// on every platform.
struct CacheKey {
    CacheKind kind = CacheKind::sampling;
    std::string model_id;
    std::string corpus_name;
    nlohmann::json params;  // k, temperature, scorer_id, strategy... as applicable

    std::string digest() const;
};

/// Line-delimited record files under <root>/<kind>/<digest>/records, each
/// line checksummed. Appends are atomic from a reader's point of view: a torn
/// tail (no trailing newline) is invisible; a complete line that fails its
/// checksum is reported as corruption with its byte offset.
class CacheStore {
public:
    explicit CacheStore(std::filesystem::path root);

    void append(const CacheKey& key, const nlohmann::json& record);
    std::vector<nlohmann::json> read_all(const CacheKey& key) const;

    struct CompactStats {
        size_t kept = 0;
        size_t removed = 0;
    };
    /// Drops records whose key_fn output was already seen, keeping the first.
    CompactStats compact(const CacheKey& key,
                         const std::function<std::string(const nlohmann::json&)>& key_fn);

    std::filesystem::path record_path(const CacheKey& key) const;
    std::filesystem::path manifest_path() const;
    const std::filesystem::path& root() const { return root_; }

    /// All keys registered in the manifest (used by compact-cache).
    std::vector<CacheKey> known_keys() const;

private:
    void register_key(const CacheKey& key);

    std::filesystem::path root_;
};

} // namespace cotsel
