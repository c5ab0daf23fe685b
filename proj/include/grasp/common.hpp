#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace grasp {

/// Bad command-line usage or invalid configuration. CLI exit code 1.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Unreadable, malformed, or internally inconsistent data. CLI exit code 2.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Model/embedding backend failure that survived the retry policy. CLI exit code 3.
struct BackendError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Dense embedding. Kept in double precision in memory; persisted as float32.
using Vec = std::vector<double>;

inline std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline std::string lower_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

inline bool starts_with_icase(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    for (size_t i = 0; i < prefix.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(s[i])) !=
            std::tolower(static_cast<unsigned char>(prefix[i])))
            return false;
    }
    return true;
}

inline std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    size_t start = 0;
    while (start <= text.size()) {
        size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            lines.emplace_back(text.substr(start));
            break;
        }
        std::string line(text.substr(start, nl - start));
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
        start = nl + 1;
    }
    return lines;
}

/// Number of whitespace-separated tokens; the mock backend's token count.
inline long whitespace_token_count(std::string_view s) {
    long n = 0;
    bool in_tok = false;
    for (char c : s) {
        bool ws = std::isspace(static_cast<unsigned char>(c));
        if (!ws && !in_tok) ++n;
        in_tok = !ws;
    }
    return n;
}

/// Word characters for lexical matching: ASCII alphanumerics plus any byte
/// >= 0x80, so multi-byte UTF-8 sequences survive intact.
inline bool is_word_byte(unsigned char c) {
    return std::isalnum(c) || c >= 0x80;
}

/// Lowercased word tokens of `text`; everything else is a separator.
inline std::vector<std::string> lexical_tokens(std::string_view text) {
    std::vector<std::string> toks;
    std::string cur;
    for (unsigned char c : text) {
        if (is_word_byte(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            toks.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) toks.push_back(std::move(cur));
    return toks;
}

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;  // offset basis
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;  // FNV prime
    }
    return h;
}

inline std::string to_hex(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

namespace detail {
inline const char* b64_alphabet() {
    return "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}
}  // namespace detail

inline std::string base64_encode(const unsigned char* data, size_t len) {
    const char* tbl = detail::b64_alphabet();
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    size_t i = 0;
    for (; i + 3 <= len; i += 3) {
        uint32_t v = (uint32_t(data[i]) << 16) | (uint32_t(data[i + 1]) << 8) |
                     uint32_t(data[i + 2]);
        out.push_back(tbl[(v >> 18) & 63]);
        out.push_back(tbl[(v >> 12) & 63]);
        out.push_back(tbl[(v >> 6) & 63]);
        out.push_back(tbl[v & 63]);
    }
    size_t rem = len - i;
    if (rem == 1) {
        uint32_t v = uint32_t(data[i]) << 16;
        out.push_back(tbl[(v >> 18) & 63]);
        out.push_back(tbl[(v >> 12) & 63]);
        out.append("==");
    } else if (rem == 2) {
        uint32_t v = (uint32_t(data[i]) << 16) | (uint32_t(data[i + 1]) << 8);
        out.push_back(tbl[(v >> 18) & 63]);
        out.push_back(tbl[(v >> 12) & 63]);
        out.push_back(tbl[(v >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

inline std::vector<unsigned char> base64_decode(std::string_view text) {
    static const auto make_rev = [] {
        std::vector<int> rev(256, -1);
        const char* tbl = detail::b64_alphabet();
        for (int i = 0; i < 64; ++i)
            rev[static_cast<unsigned char>(tbl[i])] = i;
        return rev;
    };
    static const std::vector<int> rev = make_rev();
    std::vector<unsigned char> out;
    uint32_t acc = 0;
    int bits = 0;
    size_t pad = 0;
    for (char c : text) {
        if (c == '=') {
            ++pad;
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) continue;
        int v = rev[static_cast<unsigned char>(c)];
        if (v < 0 || pad > 0)
            throw DataError("invalid base64 input");
        acc = (acc << 6) | uint32_t(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<unsigned char>((acc >> bits) & 0xff));
        }
    }
    if (pad > 2) throw DataError("invalid base64 padding");
    return out;
}

/// Encode an embedding as base64 over little-endian float32 values.
inline std::string encode_embedding(const Vec& v) {
    std::vector<unsigned char> bytes(v.size() * 4);
    for (size_t i = 0; i < v.size(); ++i) {
        float f = static_cast<float>(v[i]);
        uint32_t u;
        std::memcpy(&u, &f, 4);
        bytes[i * 4 + 0] = static_cast<unsigned char>(u & 0xff);
        bytes[i * 4 + 1] = static_cast<unsigned char>((u >> 8) & 0xff);
        bytes[i * 4 + 2] = static_cast<unsigned char>((u >> 16) & 0xff);
        bytes[i * 4 + 3] = static_cast<unsigned char>((u >> 24) & 0xff);
    }
    return base64_encode(bytes.data(), bytes.size());
}

inline Vec decode_embedding(std::string_view b64) {
    std::vector<unsigned char> bytes = base64_decode(b64);
    if (bytes.size() % 4 != 0)
        throw DataError("embedding byte length not a multiple of 4");
    Vec v(bytes.size() / 4);
    for (size_t i = 0; i < v.size(); ++i) {
        uint32_t u = uint32_t(bytes[i * 4 + 0]) | (uint32_t(bytes[i * 4 + 1]) << 8) |
                     (uint32_t(bytes[i * 4 + 2]) << 16) |
                     (uint32_t(bytes[i * 4 + 3]) << 24);
        float f;
        std::memcpy(&f, &u, 4);
        v[i] = static_cast<double>(f);
    }
    return v;
}

/// Dot product in index order. Embeddings are unit vectors, so this is the
/// cosine similarity used throughout scoring.
inline double dot(const Vec& a, const Vec& b) {
    if (a.size() != b.size())
        throw DataError("embedding dimension mismatch: " + std::to_string(a.size()) +
                        " vs " + std::to_string(b.size()));
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(const Vec& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline std::string format_fixed(double v, int places) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(places);
    os << v;
    return os.str();
}

}  // namespace grasp
