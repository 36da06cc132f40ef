#pragma once

// ZSLF embedding files: id-keyed float32 vectors of one fixed dimension.
//
// Layout (little-endian):
//   "ZSLF" | u32 version (=1) | u32 record_count | u32 dim
//   record_count x ( u16 id_byte_length | id bytes (UTF-8) | dim x float32 )

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "zsl/errors.hpp"

namespace zsl {

inline constexpr char kZslfMagic[4] = {'Z', 'S', 'L', 'F'};
inline constexpr std::uint32_t kZslfVersion = 1;

/// Ordered, id-keyed table of fixed-dimension float32 vectors.
class FeatureTable {
  public:
    FeatureTable() = default;

    explicit FeatureTable(std::uint32_t dim) : dim_(dim) {
        if (dim == 0) {
            throw ValidationError("feature table dim must be positive");
        }
    }

    std::uint32_t dim() const { return dim_; }
    std::size_t size() const { return ids_.size(); }
    bool empty() const { return ids_.empty(); }

    const std::vector<std::string>& ids() const { return ids_; }
    const std::string& id(std::size_t row) const { return ids_.at(row); }

    std::span<const float> vector(std::size_t row) const {
        return {values_.data() + row * dim_, dim_};
    }
    std::span<float> vector(std::size_t row) { return {values_.data() + row * dim_, dim_}; }

    /// Row-major backing store, size() * dim() floats.
    std::span<const float> values() const { return values_; }

    /// Appends a record. Duplicate ids are not rejected here; see validate().
    void add(std::string id, std::span<const float> vec) {
        if (vec.size() != dim_) {
            throw ValidationError("record '" + id + "' has " + std::to_string(vec.size()) +
                                  " components, table dim is " + std::to_string(dim_));
        }
        index_.emplace(id, ids_.size());
        ids_.push_back(std::move(id));
        values_.insert(values_.end(), vec.begin(), vec.end());
    }

    /// Row index of `id`, or -1.
    std::ptrdiff_t find(std::string_view id) const {
        auto it = index_.find(std::string(id));
        return it == index_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
    }

    bool contains(std::string_view id) const { return find(id) >= 0; }

    /// Throws ValidationError on duplicate ids or oversize ids.
    void validate() const {
        if (dim_ == 0) {
            throw ValidationError("feature table dim must be positive");
        }
        for (std::size_t i = 0; i < ids_.size(); ++i) {
            if (ids_[i].size() > UINT16_MAX) {
                throw ValidationError("id longer than 65535 bytes");
            }
            if (index_.at(ids_[i]) != i) {
                throw ValidationError("duplicate id '" + ids_[i] + "'");
            }
        }
    }

    friend bool operator==(const FeatureTable& a, const FeatureTable& b) {
        if (a.dim_ != b.dim_ || a.ids_ != b.ids_ || a.values_.size() != b.values_.size()) {
            return false;
        }
        // Bitwise, so NaN payloads and signed zeros count.
        return std::memcmp(a.values_.data(), b.values_.data(), a.values_.size() * sizeof(float)) == 0;
    }

  private:
    std::uint32_t dim_ = 1;
    std::vector<std::string> ids_;
    std::vector<float> values_;
    std::unordered_map<std::string, std::size_t> index_;  // first occurrence wins
};

namespace detail {

inline void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>(v >> 8));
}

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
}

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
}

inline void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

/// Bounds-checked little-endian reader over a byte buffer.
class ByteReader {
  public:
    explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

    std::size_t remaining() const { return bytes_.size() - pos_; }
    std::size_t position() const { return pos_; }

    std::string_view take(std::size_t n, const char* what) {
        if (remaining() < n) {
            throw CorruptionError(std::string("truncated ") + what + " at byte " + std::to_string(pos_));
        }
        auto out = bytes_.substr(pos_, n);
        pos_ += n;
        return out;
    }

    std::uint16_t u16(const char* what) {
        auto b = take(2, what);
        return static_cast<std::uint16_t>(static_cast<unsigned char>(b[0]) |
                                          (static_cast<unsigned char>(b[1]) << 8));
    }

    std::uint32_t u32(const char* what) {
        auto b = take(4, what);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) {
            v = (v << 8) | static_cast<unsigned char>(b[i]);
        }
        return v;
    }

    std::uint64_t u64(const char* what) {
        auto b = take(8, what);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) {
            v = (v << 8) | static_cast<unsigned char>(b[i]);
        }
        return v;
    }

    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

  private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

inline std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "' for reading");
    }
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw IoError("error reading '" + path.string() + "'");
    }
    return bytes;
}

inline void write_file_bytes(const std::filesystem::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
        throw IoError("error writing '" + path.string() + "'");
    }
}

}  // namespace detail

inline std::string encode_zslf(const FeatureTable& table) {
    table.validate();
    if (table.size() > UINT32_MAX) {
        throw ValidationError("too many records for ZSLF");
    }
    std::string out;
    out.reserve(16 + table.size() * (2 + 16 + 4 * table.dim()));
    out.append(kZslfMagic, 4);
    detail::put_u32(out, kZslfVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(table.size()));
    detail::put_u32(out, table.dim());
    for (std::size_t r = 0; r < table.size(); ++r) {
        const auto& id = table.id(r);
        detail::put_u16(out, static_cast<std::uint16_t>(id.size()));
        out.append(id);
        for (float f : table.vector(r)) {
            detail::put_f32(out, f);
        }
    }
    return out;
}

inline FeatureTable decode_zslf(std::string_view bytes) {
    detail::ByteReader in(bytes);
    if (in.remaining() < 4 || std::memcmp(bytes.data(), kZslfMagic, 4) != 0) {
        throw FormatError("not a ZSLF file (bad magic)");
    }
    in.take(4, "magic");
    const auto version = in.u32("header");
    if (version != kZslfVersion) {
        throw FormatError("unsupported ZSLF version " + std::to_string(version));
    }
    const auto count = in.u32("header");
    const auto dim = in.u32("header");
    if (dim == 0) {
        throw FormatError("ZSLF header has dim 0");
    }
    FeatureTable table(dim);
    std::vector<float> vec(dim);
    for (std::uint32_t r = 0; r < count; ++r) {
        const auto id_len = in.u16("record id length");
        std::string id(in.take(id_len, "record id"));
        for (auto& f : vec) {
            f = in.f32("record vector");
        }
        table.add(std::move(id), vec);
    }
    if (in.remaining() != 0) {
        throw CorruptionError(std::to_string(in.remaining()) + " trailing bytes after last record");
    }
    table.validate();
    return table;
}

inline FeatureTable load_feature_file(const std::filesystem::path& path) {
    return decode_zslf(detail::read_file_bytes(path));
}

inline void write_feature_file(const FeatureTable& table, const std::filesystem::path& path) {
    const auto bytes = encode_zslf(table);  // validates before touching the filesystem
    detail::write_file_bytes(path, bytes);
}

}  // namespace zsl
