#include "cotsel/cache.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "cotsel/errors.hpp"
#include "cotsel/util.hpp"

namespace cotsel {

using nlohmann::json;

const char* cache_kind_name(CacheKind kind) {
    switch (kind) {
        case CacheKind::sampling: return "sampling";
        case CacheKind::complexity: return "complexity";
        case CacheKind::evaluation: return "evaluation";
    }
    return "unknown";
}

std::string CacheKey::digest() const {
    json canon{{"kind", cache_kind_name(kind)},
               {"model_id", model_id},
               {"corpus_name", corpus_name},
               {"params", params.is_null() ? json::object() : params}};
    return hex64(fnv1a64(canon.dump()));
}

CacheStore::CacheStore(std::filesystem::path root) : root_(std::move(root)) {}

std::filesystem::path CacheStore::record_path(const CacheKey& key) const {
    return root_ / cache_kind_name(key.kind) / key.digest() / "records";
}

std::filesystem::path CacheStore::manifest_path() const {
    return root_ / "manifest.jsonl";
}

namespace {

std::string checksum_line(const std::string& payload) {
    return hex64(fnv1a64(payload)).substr(8) + "\t" + payload + "\n";
}

// Parses one checksummed line; offset is the line's first byte in the file.
json decode_line(const std::string& line, size_t offset,
                 const std::filesystem::path& path) {
    size_t tab = line.find('\t');
    if (tab == std::string::npos)
        throw Error(ErrorCode::corruption, "missing checksum separator at byte offset " +
                                               std::to_string(offset) + " in " +
                                               path.string());
    std::string sum = line.substr(0, tab);
    std::string payload = line.substr(tab + 1);
    if (sum != hex64(fnv1a64(payload)).substr(8))
        throw Error(ErrorCode::corruption, "checksum mismatch at byte offset " +
                                               std::to_string(offset) + " in " +
                                               path.string());
    try {
        return json::parse(payload);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::corruption, "unparseable record at byte offset " +
                                               std::to_string(offset) + " in " +
                                               path.string() + ": " + e.what());
    }
}

struct ScannedStore {
    std::vector<json> records;
    std::vector<std::string> raw_lines;  // checksummed form, newline excluded
};

ScannedStore scan_store(const std::filesystem::path& path) {
    ScannedStore out;
    std::ifstream in(path, std::ios::binary);
    if (!in) return out;

    std::string content((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
    size_t pos = 0;
    while (pos < content.size()) {
        size_t nl = content.find('\n', pos);
        if (nl == std::string::npos) break;  // torn tail: invisible to readers
        std::string line = content.substr(pos, nl - pos);
        out.records.push_back(decode_line(line, pos, path));
        out.raw_lines.push_back(std::move(line));
        pos = nl + 1;
    }
    return out;
}

} // namespace

void CacheStore::register_key(const CacheKey& key) {
    const std::string digest = key.digest();
    std::set<std::string> known;
    {
        std::ifstream in(manifest_path());
        std::string line;
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            try {
                known.insert(json::parse(line).value("digest", ""));
            } catch (const json::exception&) {
                // manifest is advisory; a bad line must not block appends
            }
        }
    }
    if (known.count(digest)) return;

    std::filesystem::create_directories(root_);
    std::ofstream out(manifest_path(), std::ios::app);
    if (!out)
        throw Error(ErrorCode::storage_failure,
                    "cannot write manifest " + manifest_path().string());
    json entry{{"digest", digest},
               {"kind", cache_kind_name(key.kind)},
               {"model_id", key.model_id},
               {"corpus_name", key.corpus_name},
               {"params", key.params.is_null() ? json::object() : key.params}};
    out << entry.dump() << "\n";
}

namespace {

// A crash can leave a half-written last line. It was never durable, so the
// next writer truncates it back to the last complete record.
void heal_torn_tail(const std::filesystem::path& path) {
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (ec || size == 0) return;

    std::ifstream in(path, std::ios::binary);
    in.seekg(static_cast<std::streamoff>(size) - 1);
    char last = 0;
    in.get(last);
    if (last == '\n') return;

    std::string content(size, '\0');
    in.seekg(0);
    in.read(content.data(), static_cast<std::streamsize>(size));
    const size_t keep = content.rfind('\n');
    std::filesystem::resize_file(path, keep == std::string::npos ? 0 : keep + 1);
}

} // namespace

void CacheStore::append(const CacheKey& key, const json& record) {
    const auto path = record_path(key);
    std::filesystem::create_directories(path.parent_path());
    register_key(key);
    heal_torn_tail(path);

    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out)
        throw Error(ErrorCode::storage_failure, "cannot append to " + path.string());
    out << checksum_line(record.dump());
    out.flush();
    if (!out)
        throw Error(ErrorCode::storage_failure, "write failed for " + path.string());
}

std::vector<json> CacheStore::read_all(const CacheKey& key) const {
    return scan_store(record_path(key)).records;
}

CacheStore::CompactStats CacheStore::compact(
    const CacheKey& key, const std::function<std::string(const json&)>& key_fn) {
    const auto path = record_path(key);
    ScannedStore scanned = scan_store(path);

    CompactStats stats;
    std::set<std::string> seen;
    std::string kept;
    for (size_t i = 0; i < scanned.records.size(); ++i) {
        if (seen.insert(key_fn(scanned.records[i])).second) {
            kept += scanned.raw_lines[i];
            kept += '\n';
            ++stats.kept;
        } else {
            ++stats.removed;
        }
    }
    if (scanned.records.empty()) return stats;

    const auto tmp = path.string() + ".compact";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error(ErrorCode::storage_failure, "cannot write " + tmp);
        out << kept;
    }
    std::filesystem::rename(tmp, path);
    return stats;
}

std::vector<CacheKey> CacheStore::known_keys() const {
    std::vector<CacheKey> keys;
    std::ifstream in(manifest_path());
    std::string line;
    std::set<std::string> seen;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        json entry;
        try {
            entry = json::parse(line);
        } catch (const json::exception&) {
            continue;
        }
        CacheKey key;
        std::string kind = entry.value("kind", "");
        if (kind == "sampling") key.kind = CacheKind::sampling;
        else if (kind == "complexity") key.kind = CacheKind::complexity;
        else if (kind == "evaluation") key.kind = CacheKind::evaluation;
        else continue;
        key.model_id = entry.value("model_id", "");
        key.corpus_name = entry.value("corpus_name", "");
        key.params = entry.value("params", json::object());
        if (seen.insert(key.digest()).second) keys.push_back(std::move(key));
    }
    return keys;
}

} // namespace cotsel
