// Little helpers for reading and writing packed wire structures.

#ifndef ETLAB_BYTES_HPP
#define ETLAB_BYTES_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace etlab {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

/// Bounds-checked cursor over an immutable byte range. Reads past the end
/// return std::nullopt instead of throwing so callers can map failures onto
/// their own error vocabulary.
class ByteReader {
public:
    explicit ByteReader(ByteView data, std::size_t offset = 0) : data_(data), pos_(offset) {}

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return pos_ <= data_.size() ? data_.size() - pos_ : 0; }
    bool at_end() const { return remaining() == 0; }
    ByteView data() const { return data_; }

    void seek(std::size_t offset) { pos_ = offset; }

    std::optional<std::uint8_t> u8();
    std::optional<std::uint16_t> u16le();
    std::optional<std::uint32_t> u32le();
    std::optional<std::uint64_t> u64le();
    std::optional<std::uint16_t> u16be();
    std::optional<std::uint32_t> u32be();
    std::optional<ByteView> take(std::size_t n);

private:
    ByteView data_;
    std::size_t pos_;
};

class ByteWriter {
public:
    ByteWriter() = default;
    explicit ByteWriter(Bytes initial) : buf_(std::move(initial)) {}

    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16le(std::uint16_t v);
    void u32le(std::uint32_t v);
    void u64le(std::uint64_t v);
    void u16be(std::uint16_t v);
    void u32be(std::uint32_t v);
    void bytes(ByteView v) { buf_.insert(buf_.end(), v.begin(), v.end()); }
    void text(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
    void fill(std::size_t n, std::uint8_t v) { buf_.insert(buf_.end(), n, v); }
    void pad_to(std::size_t alignment, std::uint8_t v = 0);

    std::size_t size() const { return buf_.size(); }
    Bytes& buffer() { return buf_; }
    Bytes take() { return std::move(buf_); }

    void patch_u16le(std::size_t at, std::uint16_t v);
    void patch_u32le(std::size_t at, std::uint32_t v);
    void patch_u16be(std::size_t at, std::uint16_t v);

private:
    Bytes buf_;
};

std::uint16_t load_u16le(const std::uint8_t* p);
std::uint32_t load_u32le(const std::uint8_t* p);
std::uint64_t load_u64le(const std::uint8_t* p);

constexpr std::size_t align_up(std::size_t n, std::size_t alignment) {
    return (n + alignment - 1) / alignment * alignment;
}

// Inert filler: every synthetic payload in this project is built from this
// repeating marker so generated artifacts can be scanned for anything else.
inline constexpr std::string_view kFillerMarker = "ETLAB-INERT-FILLER.";

/// `n` bytes of the marker pattern, starting `phase` bytes into the marker.
Bytes inert_filler(std::size_t n, std::size_t phase = 0);
/// True when `data` is a contiguous slice of the repeating marker pattern.
bool is_inert_filler(ByteView data);

std::string hex(std::uint64_t v, int width = 0);
std::string hex_dump(ByteView data, std::size_t max_bytes = 64);

}  // namespace etlab

#endif
