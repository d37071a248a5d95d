#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace cotsel {

// 64-bit FNV-1a. Used for cache digests and keyed draws; must stay stable
// across platforms, so nothing from <random> is allowed near it.
inline uint64_t fnv1a64(std::string_view data, uint64_t seed = 14695981039346656037ull) {
    uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::string hex64(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

// Deterministic sequence generator with platform-independent output.
class DetRng {
public:
    explicit DetRng(uint64_t seed) : state_(splitmix64(seed ^ 0x6a09e667f3bcc909ull)) {}

    uint64_t next() {
        state_ = splitmix64(state_);
        return state_;
    }

    // Uniform in [0, bound) via 128-bit multiply-shift; bound > 0.
    uint64_t next_below(uint64_t bound) {
        return static_cast<uint64_t>(
            (static_cast<unsigned __int128>(next()) * bound) >> 64);
    }

    double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    uint64_t state_;
};

// One-shot keyed draw in [0,1) from (seed, key, iteration). Pure function.
inline double keyed_unit_draw(uint64_t seed, std::string_view key, int iteration) {
    uint64_t h = fnv1a64(key);
    h = fnv1a64(std::to_string(iteration), h);
    h ^= splitmix64(seed);
    return static_cast<double>(splitmix64(h) >> 11) * 0x1.0p-53;
}

inline std::string to_lower(std::string s) {
    for (char& c : s)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return s;
}

inline std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\n' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\n' || s[e - 1] == '\r')) --e;
    return std::string(s.substr(b, e - b));
}

// Lowercase, trim, strip terminal punctuation. Idempotent; the single
// canonical text form used for answer equality everywhere.
inline std::string canonical_text(std::string_view raw) {
    std::string s = to_lower(trim(raw));
    while (!s.empty()) {
        char c = s.back();
        if (c == '.' || c == '!' || c == '?' || c == ',' || c == ';' || c == ':')
            s.pop_back();
        else
            break;
    }
    return trim(s);
}

inline std::string squash_newlines(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\n' || s[i] == '\r') {
            if (s[i] == '\r' && i + 1 < s.size() && s[i + 1] == '\n') ++i;
            out += ' ';
        } else {
            out += s[i];
        }
    }
    return out;
}

// Runs fn over [0, n) with at most `workers` threads; results land at their
// input index so merge order never depends on scheduling.
template <typename Result>
std::vector<Result> parallel_map(size_t n, int workers,
                                 const std::function<Result(size_t)>& fn) {
    std::vector<Result> results(n);
    if (n == 0) return results;
    if (workers < 1) workers = 1;
    if (static_cast<size_t>(workers) > n) workers = static_cast<int>(n);

    if (workers == 1) {
        for (size_t i = 0; i < n; ++i) results[i] = fn(i);
        return results;
    }

    std::vector<std::thread> pool;
    std::exception_ptr first_error;
    std::mutex error_mu;
    std::atomic<size_t> cursor{0};
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                size_t i = cursor.fetch_add(1);
                if (i >= n) return;
                try {
                    results[i] = fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mu);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
    return results;
}

} // namespace cotsel
