#include "etlab/capture.hpp"

#include "etlab/reassembly.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <map>
#include <tuple>

namespace etlab::capture {

namespace {

std::uint32_t bswap32(std::uint32_t v) {
    return (v >> 24) | ((v >> 8) & 0xFF00) | ((v << 8) & 0xFF0000) | (v << 24);
}
std::uint16_t bswap16(std::uint16_t v) { return static_cast<std::uint16_t>((v >> 8) | (v << 8)); }

constexpr std::size_t kEthernetHeader = 14;
constexpr std::uint16_t kEtherTypeIpv4 = 0x0800;
constexpr std::uint16_t kEtherTypeVlan = 0x8100;
constexpr std::size_t kMinFrame = 60;

std::uint16_t internet_checksum(ByteView data, std::uint32_t sum = 0) {
    for (std::size_t i = 0; i + 1 < data.size(); i += 2) sum += (data[i] << 8) | data[i + 1];
    if (data.size() % 2) sum += data.back() << 8;
    while (sum >> 16) sum = (sum & 0xFFFF) + (sum >> 16);
    return static_cast<std::uint16_t>(~sum);
}

void write_mac(ByteWriter& w, Ipv4 ip) {
    w.u8(0x02);
    w.u8(0x00);
    w.u32be(ip);
}

}  // namespace

Timestamp CaptureFile::timestamp(const CaptureRecord& r) const {
    const std::int64_t frac = nanosecond ? r.ts_frac / 1000 : r.ts_frac;
    return Timestamp{static_cast<std::int64_t>(r.ts_sec) * 1'000'000 + frac};
}

Bytes CaptureFile::serialize() const {
    ByteWriter w;
    auto put32 = [&](std::uint32_t v) { swapped ? w.u32be(v) : w.u32le(v); };
    auto put16 = [&](std::uint16_t v) { swapped ? w.u16be(v) : w.u16le(v); };
    put32(nanosecond ? kMagicNanos : kMagicMicros);
    put16(version_major);
    put16(version_minor);
    put32(static_cast<std::uint32_t>(thiszone));
    put32(sigfigs);
    put32(snaplen);
    put32(link_type);
    for (const auto& r : records) {
        if (r.frame.size() > r.original_length)
            throw CaptureError(CaptureError::Kind::InvalidRecord,
                               "captured length exceeds original length");
        put32(r.ts_sec);
        put32(r.ts_frac);
        put32(static_cast<std::uint32_t>(r.frame.size()));
        put32(r.original_length);
        w.bytes(r.frame);
    }
    return w.take();
}

CaptureFile CaptureFile::parse(ByteView bytes) {
    if (bytes.size() < kGlobalHeaderSize)
        throw CaptureError(CaptureError::Kind::BadMagic, "file shorter than a capture header");
    CaptureFile f;
    const std::uint32_t magic = load_u32le(bytes.data());
    if (magic == kMagicMicros || magic == kMagicNanos) {
        f.swapped = false;
    } else if (bswap32(magic) == kMagicMicros || bswap32(magic) == kMagicNanos) {
        f.swapped = true;
    } else {
        throw CaptureError(CaptureError::Kind::BadMagic, "unrecognized capture magic " + hex(magic, 8));
    }
    auto get32 = [&](std::size_t at) {
        const auto v = load_u32le(bytes.data() + at);
        return f.swapped ? bswap32(v) : v;
    };
    auto get16 = [&](std::size_t at) {
        const auto v = load_u16le(bytes.data() + at);
        return f.swapped ? bswap16(v) : v;
    };
    f.nanosecond = get32(0) == kMagicNanos;
    f.version_major = get16(4);
    f.version_minor = get16(6);
    f.thiszone = static_cast<std::int32_t>(get32(8));
    f.sigfigs = get32(12);
    f.snaplen = get32(16);
    f.link_type = get32(20);
    if (f.link_type != kLinkTypeEthernet)
        throw CaptureError(CaptureError::Kind::UnsupportedLinkType,
                           "link type " + std::to_string(f.link_type) + " is not Ethernet");

    std::size_t pos = kGlobalHeaderSize;
    while (pos < bytes.size()) {
        if (bytes.size() - pos < kRecordHeaderSize)
            throw CaptureError(CaptureError::Kind::TruncatedRecord,
                               "record header cut short at offset " + std::to_string(pos));
        CaptureRecord r;
        r.ts_sec = get32(pos);
        r.ts_frac = get32(pos + 4);
        const std::uint32_t caplen = get32(pos + 8);
        r.original_length = get32(pos + 12);
        pos += kRecordHeaderSize;
        if (caplen > bytes.size() - pos)
            throw CaptureError(CaptureError::Kind::TruncatedRecord,
                               "record at offset " + std::to_string(pos - kRecordHeaderSize) +
                                   " claims " + std::to_string(caplen) + " bytes");
        if (caplen > r.original_length)
            throw CaptureError(CaptureError::Kind::InvalidRecord,
                               "captured length exceeds original length at offset " +
                                   std::to_string(pos - kRecordHeaderSize));
        r.frame.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                       bytes.begin() + static_cast<std::ptrdiff_t>(pos + caplen));
        pos += caplen;
        f.records.push_back(std::move(r));
    }
    return f;
}

CaptureFile CaptureFile::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CaptureError(CaptureError::Kind::Io, "cannot open " + path.string());
    Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse(data);
}

void CaptureFile::save(const std::filesystem::path& path) const {
    const auto data = serialize();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CaptureError(CaptureError::Kind::Io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw CaptureError(CaptureError::Kind::Io, "short write to " + path.string());
}

std::optional<TcpSegment> decode_frame(ByteView frame) {
    ByteReader r(frame);
    if (!r.take(12)) return std::nullopt;
    auto ether_type = r.u16be();
    if (ether_type == kEtherTypeVlan) {
        if (!r.u16be()) return std::nullopt;
        ether_type = r.u16be();
    }
    if (ether_type != kEtherTypeIpv4) return std::nullopt;

    const std::size_t ip_start = r.offset();
    auto vihl = r.u8();
    if (!vihl || (*vihl >> 4) != 4) return std::nullopt;
    const std::size_t ihl = (*vihl & 0x0F) * 4u;
    if (ihl < 20 || frame.size() < ip_start + ihl) return std::nullopt;
    r.u8();
    const std::uint16_t total_length = *r.u16be();
    r.u16be();
    const std::uint16_t frag = *r.u16be();
    if ((frag & 0x2000) || (frag & 0x1FFF)) return std::nullopt;  // fragments are not reassembled
    r.u8();
    if (*r.u8() != 6) return std::nullopt;
    r.u16be();
    TcpSegment s;
    s.source.ip = *r.u32be();
    s.destination.ip = *r.u32be();
    if (total_length < ihl || frame.size() < ip_start + total_length) return std::nullopt;

    const std::size_t tcp_start = ip_start + ihl;
    ByteReader t(frame.first(ip_start + total_length), tcp_start);
    auto sport = t.u16be();
    auto dport = t.u16be();
    auto seq = t.u32be();
    auto ack = t.u32be();
    auto off = t.u8();
    auto flags = t.u8();
    auto window = t.u16be();
    if (!window) return std::nullopt;
    const std::size_t tcp_len = (*off >> 4) * 4u;
    if (tcp_len < 20 || total_length < ihl + tcp_len) return std::nullopt;
    s.source.port = *sport;
    s.destination.port = *dport;
    s.seq = *seq;
    s.ack = *ack;
    s.flags = *flags;
    s.window = *window;
    auto payload = frame.subspan(tcp_start + tcp_len, total_length - ihl - tcp_len);
    s.payload.assign(payload.begin(), payload.end());
    return s;
}

Bytes encode_frame(const TcpSegment& s, std::uint16_t ip_id) {
    ByteWriter w;
    write_mac(w, s.destination.ip);
    write_mac(w, s.source.ip);
    w.u16be(kEtherTypeIpv4);

    const std::size_t ip_start = w.size();
    const auto total = static_cast<std::uint16_t>(20 + 20 + s.payload.size());
    w.u8(0x45);
    w.u8(0);
    w.u16be(total);
    w.u16be(ip_id);
    w.u16be(0x4000);  // don't fragment
    w.u8(128);
    w.u8(6);
    w.u16be(0);
    w.u32be(s.source.ip);
    w.u32be(s.destination.ip);
    w.patch_u16be(ip_start + 10, internet_checksum(ByteView(w.buffer()).subspan(ip_start, 20)));

    const std::size_t tcp_start = w.size();
    w.u16be(s.source.port);
    w.u16be(s.destination.port);
    w.u32be(s.seq);
    w.u32be(s.ack);
    w.u8(0x50);
    w.u8(s.flags);
    w.u16be(s.window);
    w.u16be(0);
    w.u16be(0);
    w.bytes(s.payload);

    const std::size_t tcp_len = w.size() - tcp_start;
    std::uint32_t pseudo = (s.source.ip >> 16) + (s.source.ip & 0xFFFF) + (s.destination.ip >> 16) +
                           (s.destination.ip & 0xFFFF) + 6 + static_cast<std::uint32_t>(tcp_len);
    w.patch_u16be(tcp_start + 16,
                  internet_checksum(ByteView(w.buffer()).subspan(tcp_start, tcp_len), pseudo));
    if (w.size() < kMinFrame) w.fill(kMinFrame - w.size(), 0);
    return w.take();
}

namespace {

enum class StreamMode { Unknown, Smb, Raw };

struct PendingEvent {
    FlowEvent event;
    std::uint64_t order = 0;
    int rank = 0;
};

struct DirectionState {
    StreamMode mode = StreamMode::Unknown;
    Bytes buffer;
    std::uint64_t buffer_offset = 0;
    std::vector<std::pair<std::uint64_t, Timestamp>> marks;  // chunk start offsets
    bool fin_seen = false;
    // Segments seen before the stream could be anchored (SYN not yet arrived).
    std::vector<std::pair<TcpSegment, Timestamp>> held;
};

struct Connection {
    TcpFlowAssembly assembly;
    DirectionState dirs[2];
    bool closed = false;
    std::optional<Timestamp> syn_time, first_time;
};

class Ingest {
public:
    explicit Ingest(const IngestOptions& options) : options_(options) {}

    void segment(const TcpSegment& seg, Timestamp ts);
    std::vector<FlowEvent> finish();

private:
    void emit(const Connection& c, Direction d, Timestamp ts, FlowEventKind kind, std::uint64_t order, int rank) {
        events_.push_back({FlowEvent{ts, c.assembly.key, d, std::move(kind)}, order, rank});
    }
    void process(Connection& c, Direction d, const TcpSegment& seg, Timestamp ts);
    void release_held(Connection& c, Direction d);
    void deliver(Connection& c, Direction d, std::vector<StreamChunk> chunks);
    void drain(Connection& c, Direction d, bool at_end);
    void emit_raw_chunks(Connection& c, Direction d);
    void finish_connection(Connection& c);

    IngestOptions options_;
    std::map<FlowKey, Connection> live_;
    std::vector<Connection> retired_;
    std::vector<PendingEvent> events_;
};

Timestamp mark_time(const DirectionState& s, std::uint64_t offset) {
    Timestamp ts = s.marks.empty() ? Timestamp{0} : s.marks.front().second;
    for (const auto& [o, t] : s.marks) {
        if (o > offset) break;
        ts = t;
    }
    return ts;
}

void Ingest::segment(const TcpSegment& seg, Timestamp ts) {
    const bool to_service = seg.destination.port == options_.service_port;
    if (!to_service && seg.source.port != options_.service_port) return;
    const Direction d = to_service ? Direction::ClientToServer : Direction::ServerToClient;
    const FlowKey key = to_service ? FlowKey{seg.source, seg.destination} : FlowKey{seg.destination, seg.source};
    const bool opening = d == Direction::ClientToServer && seg.has(tcp_flags::kSyn) && !seg.has(tcp_flags::kAck);

    auto it = live_.find(key);
    if (it != live_.end() && opening && it->second.closed) {
        finish_connection(it->second);
        retired_.push_back(std::move(it->second));
        live_.erase(it);
        it = live_.end();
    }
    if (it == live_.end()) {
        it = live_.emplace(key, Connection{}).first;
        it->second.assembly.key = key;
    }
    Connection& c = it->second;
    if (!c.first_time || ts < *c.first_time) c.first_time = ts;
    if (opening && !c.syn_time) c.syn_time = ts;

    auto& stream = c.assembly.stream(d);
    if (seg.has(tcp_flags::kSyn)) {
        if (!stream.started()) {
            stream.start(seg.seq + 1);
            release_held(c, d);
        }
        return;
    }
    if (!stream.started()) {
        c.dirs[static_cast<int>(d)].held.emplace_back(seg, ts);
        return;
    }
    process(c, d, seg, ts);
}

void Ingest::release_held(Connection& c, Direction d) {
    auto held = std::move(c.dirs[static_cast<int>(d)].held);
    c.dirs[static_cast<int>(d)].held.clear();
    for (const auto& [seg, ts] : held) process(c, d, seg, ts);
}

void Ingest::process(Connection& c, Direction d, const TcpSegment& seg, Timestamp ts) {
    auto& stream = c.assembly.stream(d);
    if (!seg.payload.empty()) deliver(c, d, stream.add(seg.seq, seg.payload, ts));
    if (seg.has(tcp_flags::kFin) || seg.has(tcp_flags::kRst)) {
        auto& state = c.dirs[static_cast<int>(d)];
        if (!state.fin_seen) {
            state.fin_seen = true;
            const auto fin_seq = static_cast<std::uint32_t>(seg.seq + seg.payload.size());
            emit(c, d, ts, TcpFin{}, stream.offset_of(fin_seq).value_or(0), 2);
        }
        if (seg.has(tcp_flags::kRst) || (c.dirs[0].fin_seen && c.dirs[1].fin_seen)) c.closed = true;
    }
}

void Ingest::deliver(Connection& c, Direction d, std::vector<StreamChunk> chunks) {
    auto& s = c.dirs[static_cast<int>(d)];
    for (auto& chunk : chunks) {
        if (s.mode == StreamMode::Raw) {
            emit(c, d, chunk.timestamp, RawTcpData{chunk.data.size()}, chunk.offset, 1);
            continue;
        }
        if (s.buffer.empty()) s.buffer_offset = chunk.offset;
        s.marks.emplace_back(chunk.offset, chunk.timestamp);
        s.buffer.insert(s.buffer.end(), chunk.data.begin(), chunk.data.end());
        drain(c, d, false);
    }
}

void Ingest::emit_raw_chunks(Connection& c, Direction d) {
    auto& s = c.dirs[static_cast<int>(d)];
    const std::uint64_t end = s.buffer_offset + s.buffer.size();
    for (std::size_t i = 0; i < s.marks.size(); ++i) {
        const auto from = std::max(s.marks[i].first, s.buffer_offset);
        const auto to = i + 1 < s.marks.size() ? s.marks[i + 1].first : end;
        if (to > from) emit(c, d, s.marks[i].second, RawTcpData{static_cast<std::size_t>(to - from)}, from, 1);
    }
    s.buffer.clear();
    s.marks.clear();
    s.buffer_offset = end;
}

void Ingest::drain(Connection& c, Direction d, bool at_end) {
    auto& s = c.dirs[static_cast<int>(d)];
    if (s.mode == StreamMode::Unknown) {
        static constexpr std::uint8_t kSmbMagic[4] = {0xFF, 'S', 'M', 'B'};
        if (s.buffer.size() >= 8)
            s.mode = s.buffer[0] == 0x00 && std::equal(kSmbMagic, kSmbMagic + 4, s.buffer.begin() + 4)
                         ? StreamMode::Smb
                         : StreamMode::Raw;
        else if (at_end)
            s.mode = StreamMode::Raw;
        else
            return;
        if (s.mode == StreamMode::Raw) {
            emit_raw_chunks(c, d);
            return;
        }
    }
    if (s.mode != StreamMode::Smb) return;

    std::size_t consumed = 0;
    while (s.buffer.size() - consumed >= smb::kNetBiosHeaderSize) {
        const std::uint8_t* p = s.buffer.data() + consumed;
        const std::size_t len = (std::size_t{p[1]} << 16) | (std::size_t{p[2]} << 8) | p[3];
        const std::size_t frame = smb::kNetBiosHeaderSize + len;
        if (s.buffer.size() - consumed < frame) break;
        const std::uint64_t offset = s.buffer_offset + consumed;
        const Timestamp ts = mark_time(s, offset);
        ByteView bytes(p, frame);
        try {
            emit(c, d, ts, smb::parse_smb(bytes), offset, 1);
        } catch (const smb::SmbParseError&) {
            emit(c, d, ts, RawTcpData{frame}, offset, 1);
        }
        consumed += frame;
    }
    if (at_end && consumed < s.buffer.size()) {
        const std::uint64_t offset = s.buffer_offset + consumed;
        emit(c, d, mark_time(s, offset), RawTcpData{s.buffer.size() - consumed}, offset, 1);
        consumed = s.buffer.size();
    }
    if (consumed) {
        s.buffer.erase(s.buffer.begin(), s.buffer.begin() + static_cast<std::ptrdiff_t>(consumed));
        s.buffer_offset += consumed;
        // Keep the last mark at or before the new buffer start.
        std::size_t keep = 0;
        while (keep + 1 < s.marks.size() && s.marks[keep + 1].first <= s.buffer_offset) ++keep;
        s.marks.erase(s.marks.begin(), s.marks.begin() + static_cast<std::ptrdiff_t>(keep));
    }
}

void Ingest::finish_connection(Connection& c) {
    emit(c, Direction::ClientToServer, c.syn_time.value_or(c.first_time.value_or(Timestamp{0})), RawTcpOpen{}, 0, 0);
    for (auto d : {Direction::ClientToServer, Direction::ServerToClient}) {
        auto& held = c.dirs[static_cast<int>(d)].held;
        if (!held.empty()) {
            // No SYN in the capture: anchor at the lowest sequence number held.
            std::uint32_t low = held.front().first.seq;
            for (const auto& [seg, ts] : held)
                if (static_cast<std::int32_t>(seg.seq - low) < 0) low = seg.seq;
            c.assembly.stream(d).start(low);
            release_held(c, d);
        }
        deliver(c, d, c.assembly.stream(d).flush());
        drain(c, d, true);
    }
}

std::vector<FlowEvent> Ingest::finish() {
    for (auto& [key, c] : live_) finish_connection(c);
    std::stable_sort(events_.begin(), events_.end(), [](const PendingEvent& a, const PendingEvent& b) {
        return std::tie(a.event.timestamp, a.event.flow, a.event.direction, a.order, a.rank) <
               std::tie(b.event.timestamp, b.event.flow, b.event.direction, b.order, b.rank);
    });
    std::vector<FlowEvent> out;
    out.reserve(events_.size());
    for (auto& e : events_) out.push_back(std::move(e.event));
    return out;
}

}  // namespace

std::vector<FlowEvent> read_capture(const CaptureFile& file, const IngestOptions& options) {
    Ingest ingest(options);
    for (const auto& r : file.records)
        if (auto seg = decode_frame(r.frame)) ingest.segment(*seg, file.timestamp(r));
    return ingest.finish();
}

std::vector<FlowEvent> read_capture(const std::filesystem::path& path, const IngestOptions& options) {
    return read_capture(CaptureFile::load(path), options);
}

}  // namespace etlab::capture
