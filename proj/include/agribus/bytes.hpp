#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "agribus/result.hpp"

namespace agribus {

using Bytes = std::vector<uint8_t>;

/// Little-endian append-only writer.
class ByteWriter {
  public:
    ByteWriter() = default;
    explicit ByteWriter(Bytes& out) : out_(&out) {}

    void u8(uint8_t v) { buf().push_back(v); }
    void u16(uint16_t v) { le(v); }
    void u32(uint32_t v) { le(v); }
    void u64(uint64_t v) { le(v); }
    void f32(float v) {
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        le(bits);
    }
    void raw(std::span<const uint8_t> data) { buf().insert(buf().end(), data.begin(), data.end()); }
    void raw(const Bytes& data) { raw(std::span<const uint8_t>(data)); }
    /// 4-byte length prefix followed by the bytes.
    void blob(std::span<const uint8_t> data) {
        u32(static_cast<uint32_t>(data.size()));
        raw(data);
    }
    void text(const std::string& s) {
        u32(static_cast<uint32_t>(s.size()));
        buf().insert(buf().end(), s.begin(), s.end());
    }

    Bytes take() { return std::move(own_); }
    const Bytes& bytes() const { return out_ ? *out_ : own_; }
    size_t size() const { return bytes().size(); }

  private:
    template <class T>
    void le(T v) {
        for (size_t i = 0; i < sizeof(T); ++i) buf().push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    Bytes& buf() { return out_ ? *out_ : own_; }
    Bytes own_;
    Bytes* out_ = nullptr;
};

/// Bounds-checked little-endian reader; never reads past the buffer.
class ByteReader {
  public:
    explicit ByteReader(std::span<const uint8_t> data) : data_(data) {}

    Result<uint8_t> u8() {
        if (remaining() < 1) return Errc::TRUNCATED;
        return data_[pos_++];
    }
    Result<uint16_t> u16() { return le<uint16_t>(); }
    Result<uint32_t> u32() { return le<uint32_t>(); }
    Result<uint64_t> u64() { return le<uint64_t>(); }
    Result<float> f32() {
        auto bits = le<uint32_t>();
        if (!bits) return bits.error();
        float v;
        uint32_t b = bits.value();
        std::memcpy(&v, &b, 4);
        return v;
    }
    Result<Bytes> raw(size_t n) {
        if (remaining() < n) return Errc::TRUNCATED;
        Bytes out(data_.begin() + pos_, data_.begin() + pos_ + n);
        pos_ += n;
        return out;
    }
    Result<Bytes> blob() {
        auto n = u32();
        if (!n) return n.error();
        return raw(n.value());
    }
    Result<std::string> text() {
        auto b = blob();
        if (!b) return b.error();
        return std::string(b.value().begin(), b.value().end());
    }
    Status skip(size_t n) {
        if (remaining() < n) return Errc::TRUNCATED;
        pos_ += n;
        return Status::success();
    }

    size_t remaining() const { return data_.size() - pos_; }
    bool done() const { return remaining() == 0; }
    size_t position() const { return pos_; }

  private:
    template <class T>
    Result<T> le() {
        if (remaining() < sizeof(T)) return Errc::TRUNCATED;
        T v = 0;
        for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(data_[pos_ + i]) << (8 * i);
        pos_ += sizeof(T);
        return v;
    }
    std::span<const uint8_t> data_;
    size_t pos_ = 0;
};

/// Validates that a byte string is well-formed UTF-8.
inline bool is_valid_utf8(std::span<const uint8_t> s) {
    size_t i = 0;
    while (i < s.size()) {
        uint8_t c = s[i];
        size_t len;
        uint32_t cp;
        if (c < 0x80) {
            ++i;
            continue;
        } else if ((c & 0xE0) == 0xC0) {
            len = 2;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            len = 4;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (i + len > s.size()) return false;
        for (size_t k = 1; k < len; ++k) {
            if ((s[i + k] & 0xC0) != 0x80) return false;
            cp = (cp << 6) | (s[i + k] & 0x3F);
        }
        // reject overlong encodings, surrogates, and out-of-range code points
        if (len == 2 && cp < 0x80) return false;
        if (len == 3 && (cp < 0x800 || (cp >= 0xD800 && cp <= 0xDFFF))) return false;
        if (len == 4 && (cp < 0x10000 || cp > 0x10FFFF)) return false;
        i += len;
    }
    return true;
}

inline std::string to_hex(std::span<const uint8_t> data) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    s.reserve(data.size() * 2);
    for (uint8_t b : data) {
        s.push_back(digits[b >> 4]);
        s.push_back(digits[b & 0xF]);
    }
    return s;
}

}  // namespace agribus
