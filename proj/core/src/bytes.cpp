#include "etlab/bytes.hpp"

#include <algorithm>
#include <cstdio>

namespace etlab {

std::uint16_t load_u16le(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t load_u32le(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint64_t load_u64le(const std::uint8_t* p) {
    return static_cast<std::uint64_t>(load_u32le(p)) |
           (static_cast<std::uint64_t>(load_u32le(p + 4)) << 32);
}

std::optional<std::uint8_t> ByteReader::u8() {
    if (remaining() < 1) return std::nullopt;
    return data_[pos_++];
}

std::optional<std::uint16_t> ByteReader::u16le() {
    if (remaining() < 2) return std::nullopt;
    auto v = load_u16le(data_.data() + pos_);
    pos_ += 2;
    return v;
}

std::optional<std::uint32_t> ByteReader::u32le() {
    if (remaining() < 4) return std::nullopt;
    auto v = load_u32le(data_.data() + pos_);
    pos_ += 4;
    return v;
}

std::optional<std::uint64_t> ByteReader::u64le() {
    if (remaining() < 8) return std::nullopt;
    auto v = load_u64le(data_.data() + pos_);
    pos_ += 8;
    return v;
}

std::optional<std::uint16_t> ByteReader::u16be() {
    if (remaining() < 2) return std::nullopt;
    auto v = static_cast<std::uint16_t>((data_[pos_] << 8) | data_[pos_ + 1]);
    pos_ += 2;
    return v;
}

std::optional<std::uint32_t> ByteReader::u32be() {
    if (remaining() < 4) return std::nullopt;
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | data_[pos_ + i];
    pos_ += 4;
    return v;
}

std::optional<ByteView> ByteReader::take(std::size_t n) {
    if (remaining() < n) return std::nullopt;
    auto v = data_.subspan(pos_, n);
    pos_ += n;
    return v;
}

void ByteWriter::u16le(std::uint16_t v) {
    buf_.push_back(static_cast<std::uint8_t>(v));
    buf_.push_back(static_cast<std::uint8_t>(v >> 8));
}

void ByteWriter::u32le(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64le(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u16be(std::uint16_t v) {
    buf_.push_back(static_cast<std::uint8_t>(v >> 8));
    buf_.push_back(static_cast<std::uint8_t>(v));
}

void ByteWriter::u32be(std::uint32_t v) {
    for (int i = 3; i >= 0; --i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::pad_to(std::size_t alignment, std::uint8_t v) {
    buf_.resize(align_up(buf_.size(), alignment), v);
}

void ByteWriter::patch_u16le(std::size_t at, std::uint16_t v) {
    buf_.at(at) = static_cast<std::uint8_t>(v);
    buf_.at(at + 1) = static_cast<std::uint8_t>(v >> 8);
}

void ByteWriter::patch_u32le(std::size_t at, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.at(at + i) = static_cast<std::uint8_t>(v >> (8 * i));
}

void ByteWriter::patch_u16be(std::size_t at, std::uint16_t v) {
    buf_.at(at) = static_cast<std::uint8_t>(v >> 8);
    buf_.at(at + 1) = static_cast<std::uint8_t>(v);
}

Bytes inert_filler(std::size_t n, std::size_t phase) {
    Bytes out(n);
    const auto m = kFillerMarker.size();
    for (std::size_t i = 0; i < n; ++i)
        out[i] = static_cast<std::uint8_t>(kFillerMarker[(phase + i) % m]);
    return out;
}

bool is_inert_filler(ByteView data) {
    if (data.empty()) return true;
    const auto m = kFillerMarker.size();
    for (std::size_t phase = 0; phase < m; ++phase) {
        bool ok = true;
        for (std::size_t i = 0; i < data.size() && ok; ++i)
            ok = data[i] == static_cast<std::uint8_t>(kFillerMarker[(phase + i) % m]);
        if (ok) return true;
    }
    return false;
}

std::string hex(std::uint64_t v, int width) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "0x%0*llx", width, static_cast<unsigned long long>(v));
    return buf;
}

std::string hex_dump(ByteView data, std::size_t max_bytes) {
    std::string out;
    char buf[4];
    const auto n = std::min(data.size(), max_bytes);
    for (std::size_t i = 0; i < n; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", data[i]);
        if (i) out += ' ';
        out += buf;
    }
    if (data.size() > n) out += " ...";
    return out;
}

}  // namespace etlab
