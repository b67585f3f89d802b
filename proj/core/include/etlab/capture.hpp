// Classic capture-file container, Ethernet/IPv4/TCP framing, and ingestion of
// a capture into ordered FlowEvents.

#ifndef ETLAB_CAPTURE_HPP
#define ETLAB_CAPTURE_HPP

#include "etlab/bytes.hpp"
#include "etlab/flow_event.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace etlab::capture {

inline constexpr std::uint32_t kMagicMicros = 0xA1B2C3D4;
inline constexpr std::uint32_t kMagicNanos = 0xA1B23C4D;
inline constexpr std::uint32_t kLinkTypeEthernet = 1;
inline constexpr std::size_t kGlobalHeaderSize = 24;
inline constexpr std::size_t kRecordHeaderSize = 16;

class CaptureError : public std::runtime_error {
public:
    enum class Kind { BadMagic, TruncatedRecord, UnsupportedLinkType, InvalidRecord, Io };
    CaptureError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

struct CaptureRecord {
    std::uint32_t ts_sec = 0;
    std::uint32_t ts_frac = 0;  // microseconds, or nanoseconds for the nanosecond magic
    std::uint32_t original_length = 0;
    Bytes frame;  // captured bytes; captured length is frame.size()

    bool operator==(const CaptureRecord&) const = default;
};

struct CaptureFile {
    bool swapped = false;      // multi-byte fields stored big-endian
    bool nanosecond = false;
    std::uint16_t version_major = 2;
    std::uint16_t version_minor = 4;
    std::int32_t thiszone = 0;
    std::uint32_t sigfigs = 0;
    std::uint32_t snaplen = 65535;
    std::uint32_t link_type = kLinkTypeEthernet;
    std::vector<CaptureRecord> records;

    Timestamp timestamp(const CaptureRecord& r) const;

    /// Throws CaptureError(InvalidRecord) when a record's captured length
    /// exceeds its original length.
    Bytes serialize() const;
    static CaptureFile parse(ByteView bytes);

    static CaptureFile load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    bool operator==(const CaptureFile&) const = default;
};

namespace tcp_flags {
inline constexpr std::uint8_t kFin = 0x01;
inline constexpr std::uint8_t kSyn = 0x02;
inline constexpr std::uint8_t kRst = 0x04;
inline constexpr std::uint8_t kPsh = 0x08;
inline constexpr std::uint8_t kAck = 0x10;
}  // namespace tcp_flags

struct TcpSegment {
    Endpoint source;
    Endpoint destination;
    std::uint32_t seq = 0;
    std::uint32_t ack = 0;
    std::uint8_t flags = 0;
    std::uint16_t window = 0xFAF0;
    Bytes payload;

    bool has(std::uint8_t flag) const { return (flags & flag) != 0; }
    bool operator==(const TcpSegment&) const = default;
};

/// Ethernet II + IPv4 + TCP. Returns nullopt for anything else, for IP
/// fragments, and for frames whose headers are cut short.
std::optional<TcpSegment> decode_frame(ByteView frame);
/// Builds a frame with valid IPv4 and TCP checksums.
Bytes encode_frame(const TcpSegment& segment, std::uint16_t ip_id);

struct IngestOptions {
    std::uint16_t service_port = kSmbPort;
};

/// Reassembles every TCP connection touching the service port, frames its
/// NetBIOS messages and emits FlowEvents in timestamp order. Messages are
/// stamped with the capture time of the segment carrying their first byte,
/// so reordered segments yield the same events as an in-order capture.
std::vector<FlowEvent> read_capture(const CaptureFile& file, const IngestOptions& options = {});
std::vector<FlowEvent> read_capture(const std::filesystem::path& path, const IngestOptions& options = {});

}  // namespace etlab::capture

#endif
