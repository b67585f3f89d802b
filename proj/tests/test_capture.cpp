#include "etlab/capture.hpp"
#include "etlab/reassembly.hpp"
#include "etlab/trace_gen.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

using namespace etlab;
using namespace etlab::capture;
using etlab::testing::Gen;

namespace {

// Ones'-complement sum over the whole header including the stored checksum.
std::uint16_t fold(ByteView data, std::uint32_t sum = 0) {
    for (std::size_t i = 0; i < data.size(); i += 2)
        sum += static_cast<std::uint32_t>(data[i] << 8) | (i + 1 < data.size() ? data[i + 1] : 0);
    while (sum >> 16) sum = (sum & 0xFFFF) + (sum >> 16);
    return static_cast<std::uint16_t>(sum);
}

TcpSegment sample_segment() {
    TcpSegment s;
    s.source = {make_ipv4(10, 10, 10, 151), 49200};
    s.destination = {make_ipv4(10, 10, 10, 152), 445};
    s.seq = 0x01020304;
    s.ack = 0x0A0B0C0D;
    s.flags = tcp_flags::kAck | tcp_flags::kPsh;
    s.payload = inert_filler(33);
    return s;
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("etlab_test_" + name);
}

}  // namespace

TEST(CaptureFile, GlobalHeaderIsBitExact) {
    CaptureFile f;
    const auto bytes = f.serialize();
    const Bytes expected = {0xD4, 0xC3, 0xB2, 0xA1, 2, 0, 4, 0, 0, 0, 0, 0, 0, 0, 0, 0,
                            0xFF, 0xFF, 0, 0, 1, 0, 0, 0};
    EXPECT_EQ(bytes, expected);
    EXPECT_TRUE(CaptureFile::parse(bytes).records.empty());
}

TEST(CaptureFile, RoundTripsInBothByteOrders) {
    for (bool swapped : {false, true}) {
        for (bool nanos : {false, true}) {
            CaptureFile f;
            f.swapped = swapped;
            f.nanosecond = nanos;
            f.records.push_back({1494460800, 250'000, 70, Bytes(60, 0xAB)});
            f.records.push_back({1494460801, 0, 54, Bytes(54, 0xCD)});
            const auto parsed = CaptureFile::parse(f.serialize());
            EXPECT_EQ(parsed, f);
            EXPECT_EQ(parsed.timestamp(parsed.records[0]).count(),
                      1494460800LL * 1'000'000 + (nanos ? 250 : 250'000));
        }
    }
}

TEST(CaptureFile, TypedErrors) {
    auto kind_of = [](ByteView b) {
        try {
            CaptureFile::parse(b);
        } catch (const CaptureError& e) {
            return e.kind();
        }
        ADD_FAILURE();
        return CaptureError::Kind::Io;
    };
    CaptureFile f;
    f.records.push_back({0, 0, 60, Bytes(60, 1)});
    auto good = f.serialize();

    auto bad = good;
    bad[0] = 0x0A;
    EXPECT_EQ(kind_of(bad), CaptureError::Kind::BadMagic);
    EXPECT_EQ(kind_of(ByteView(good).first(10)), CaptureError::Kind::BadMagic);

    auto link = good;
    link[20] = 101;
    EXPECT_EQ(kind_of(link), CaptureError::Kind::UnsupportedLinkType);

    EXPECT_EQ(kind_of(ByteView(good).first(good.size() - 1)), CaptureError::Kind::TruncatedRecord);
    EXPECT_EQ(kind_of(ByteView(good).first(24 + 10)), CaptureError::Kind::TruncatedRecord);

    auto oversize = good;
    oversize[24 + 12] = 10;  // original length below captured length
    EXPECT_EQ(kind_of(oversize), CaptureError::Kind::InvalidRecord);

    f.records[0].original_length = 5;
    EXPECT_THROW(f.serialize(), CaptureError);
    EXPECT_THROW(CaptureFile::load("/nonexistent/etlab.pcap"), CaptureError);
}

TEST(Frames, EncodeDecodeWithValidChecksums) {
    const auto seg = sample_segment();
    const auto frame = encode_frame(seg, 77);
    ASSERT_EQ(frame.size(), 14u + 20 + 20 + 33);
    EXPECT_EQ(fold(ByteView(frame).subspan(14, 20)), 0xFFFF);

    // TCP pseudo-header: addresses, protocol, TCP length.
    const std::uint32_t pseudo = (seg.source.ip >> 16) + (seg.source.ip & 0xFFFF) + (seg.destination.ip >> 16) +
                                 (seg.destination.ip & 0xFFFF) + 6 + 53;
    EXPECT_EQ(fold(ByteView(frame).subspan(34), pseudo), 0xFFFF);

    const auto back = decode_frame(frame);
    ASSERT_TRUE(back);
    EXPECT_EQ(*back, seg);
}

TEST(Frames, ShortFramesArePaddedAndStillDecode) {
    auto seg = sample_segment();
    seg.payload.clear();
    seg.flags = tcp_flags::kSyn;
    const auto frame = encode_frame(seg, 1);
    EXPECT_EQ(frame.size(), 60u);
    const auto back = decode_frame(frame);
    ASSERT_TRUE(back);
    EXPECT_TRUE(back->payload.empty());  // padding is not payload
}

TEST(Frames, RejectsNonTcpAndFragments) {
    auto frame = encode_frame(sample_segment(), 1);
    auto frag = frame;
    frag[20] = 0x20;  // more fragments
    EXPECT_FALSE(decode_frame(frag));
    auto udp = frame;
    udp[23] = 17;
    EXPECT_FALSE(decode_frame(udp));
    auto arp = frame;
    arp[12] = 0x08;
    arp[13] = 0x06;
    EXPECT_FALSE(decode_frame(arp));
    EXPECT_FALSE(decode_frame(ByteView(frame).first(40)));
}

TEST(Frames, VlanTagIsSkipped) {
    auto frame = encode_frame(sample_segment(), 1);
    Bytes tagged(frame.begin(), frame.begin() + 12);
    tagged.insert(tagged.end(), {0x81, 0x00, 0x00, 0x05});
    tagged.insert(tagged.end(), frame.begin() + 12, frame.end());
    const auto back = decode_frame(tagged);
    ASSERT_TRUE(back);
    EXPECT_EQ(back->payload, sample_segment().payload);
}

TEST(Reassembly, DeliversInOrderOnceAcrossRetransmissions) {
    StreamReassembler r;
    r.start(1000);
    const Bytes data = inert_filler(30);
    auto part = [&](std::size_t from, std::size_t n) { return ByteView(data).subspan(from, n); };
    EXPECT_TRUE(r.add(1010, part(10, 10), Timestamp{2}).empty());
    auto out = r.add(1000, part(0, 12), Timestamp{1});  // overlaps the held segment
    ASSERT_EQ(out.size(), 2u);
    EXPECT_EQ(out[0].offset, 0u);
    EXPECT_EQ(out[1].offset, 12u);
    EXPECT_EQ(out[1].data.size(), 8u);
    EXPECT_EQ(out[1].timestamp, Timestamp{2});
    EXPECT_TRUE(r.add(1005, part(5, 10), Timestamp{3}).empty());  // pure retransmission
    EXPECT_EQ(r.delivered(), 20u);
}

TEST(Reassembly, FlushRecordsGaps) {
    StreamReassembler r;
    r.start(0);
    r.add(10, Bytes(5, 1), Timestamp{1});
    const auto out = r.flush();
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].offset, 10u);
    ASSERT_EQ(r.gaps().size(), 1u);
    EXPECT_EQ(r.gaps()[0], (StreamGap{0, 10}));
}

TEST(Reassembly, SequenceWrapAround) {
    StreamReassembler r;
    r.start(0xFFFFFFF0u);
    const Bytes data = inert_filler(40);
    auto a = r.add(0x00000010u, ByteView(data).subspan(32, 8), Timestamp{1});
    EXPECT_TRUE(a.empty());
    auto b = r.add(0xFFFFFFF0u, ByteView(data).first(32), Timestamp{2});
    ASSERT_EQ(b.size(), 2u);
    EXPECT_EQ(b[1].offset, 32u);
}

TEST(ReassemblyProperty, PermutationsYieldTheSameStream) {
    Gen g(0x7C9);
    for (int trial = 0; trial < 200; ++trial) {
        const Bytes data = g.bytes(g.range(1, 5000));
        const std::uint32_t isn = g.u32();
        struct Seg {
            std::uint32_t seq;
            Bytes payload;
        };
        std::vector<Seg> segs;
        for (std::size_t at = 0; at < data.size();) {
            const std::size_t n = std::min(data.size() - at, g.range(1, 700));
            segs.push_back({static_cast<std::uint32_t>(isn + at), Bytes(data.begin() + static_cast<std::ptrdiff_t>(at),
                                                                       data.begin() + static_cast<std::ptrdiff_t>(at + n))});
            // Sometimes retransmit an overlapping window.
            if (g.chance(20) && at > 0) {
                const std::size_t back = g.range(1, at);
                const std::size_t len = std::min(data.size() - (at - back), g.range(1, 900));
                segs.push_back({static_cast<std::uint32_t>(isn + at - back),
                                Bytes(data.begin() + static_cast<std::ptrdiff_t>(at - back),
                                      data.begin() + static_cast<std::ptrdiff_t>(at - back + len))});
            }
            at += n;
        }
        g.shuffle(segs);
        StreamReassembler r;
        r.start(isn);
        Bytes assembled;
        std::uint64_t expect_offset = 0;
        for (const auto& s : segs)
            for (auto& c : r.add(s.seq, s.payload, Timestamp{0})) {
                ASSERT_EQ(c.offset, expect_offset);
                expect_offset += c.data.size();
                assembled.insert(assembled.end(), c.data.begin(), c.data.end());
            }
        ASSERT_EQ(assembled, data) << "trial " << trial;
        ASSERT_EQ(r.pending_segments(), 0u);
    }
}

TEST(Ingest, EmptyCaptureYieldsNoEvents) {
    EXPECT_TRUE(read_capture(CaptureFile{}).empty());
}

TEST(Ingest, FramesSmbAndRawStreams) {
    const auto file = generate_trace(Scenario::truncated(5), 11);
    const auto events = read_capture(file);
    std::size_t smb = 0, raw = 0, opens = 0;
    std::set<std::uint16_t> raw_ports;
    for (const auto& e : events) {
        if (e.smb()) ++smb;
        if (std::holds_alternative<RawTcpOpen>(e.kind)) ++opens;
        if (std::holds_alternative<RawTcpData>(e.kind)) {
            ++raw;
            raw_ports.insert(e.flow.client.port);
        }
    }
    EXPECT_EQ(opens, 15u);  // upload, reserve and 13 raw connections
    EXPECT_EQ(raw_ports.size(), 13u);
    EXPECT_GT(smb, 10u);
    for (std::size_t i = 1; i < events.size(); ++i) ASSERT_LE(events[i - 1].timestamp, events[i].timestamp);
}

TEST(Ingest, ReservationIsOneLargeMessage) {
    const auto events = read_capture(generate_trace(Scenario::truncated(4), 3));
    bool found = false;
    for (const auto& e : events)
        if (auto* m = e.smb(); m && m->header.command == smb::command::kSessionSetupAndX &&
                               m->has_anomaly(smb::Anomaly::ExtendedSecurityMismatch)) {
            EXPECT_EQ(m->wire_size(), 0x10000u);
            found = true;
        }
    EXPECT_TRUE(found);
}

TEST(IngestProperty, ReorderedSegmentsGiveTheSameEvents) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto file = generate_trace(seed % 2 ? Scenario::full_attack() : Scenario::benign(), seed);
        const auto reference = read_capture(file);
        Gen g(seed);
        auto shuffled = file;
        // Swap neighbouring records inside windows of a few packets.
        for (std::size_t i = 0; i + 1 < shuffled.records.size(); ++i)
            if (g.chance(30)) std::swap(shuffled.records[i], shuffled.records[i + 1]);
        // Keep capture timestamps attached to the packets they were taken with.
        EXPECT_EQ(read_capture(shuffled), reference) << "seed " << seed;
    }
}

TEST(Ingest, CaptureWithoutHandshakeStillFrames) {
    auto file = generate_trace(Scenario::benign(), 12);
    const auto reference = read_capture(file);
    std::erase_if(file.records, [](const CaptureRecord& r) {
        const auto seg = decode_frame(r.frame);
        return seg && seg->has(tcp_flags::kSyn);
    });
    auto smb_only = [](const std::vector<FlowEvent>& events) {
        std::vector<FlowEvent> out;
        for (const auto& e : events)
            if (e.smb()) out.push_back(e);
        return out;
    };
    const auto events = read_capture(file);
    EXPECT_EQ(smb_only(events), smb_only(reference));
    EXPECT_GT(smb_only(events).size(), 10u);
}

TEST(TraceGen, ScenarioNames) {
    EXPECT_EQ(Scenario::parse("benign"), Scenario::benign());
    EXPECT_EQ(Scenario::parse("full-attack"), Scenario::full_attack());
    EXPECT_EQ(Scenario::parse("truncated:6"), Scenario::truncated(6));
    EXPECT_EQ(to_string(Scenario::truncated(6)), "truncated:6");
    EXPECT_THROW(Scenario::parse("truncated:13"), std::invalid_argument);
    EXPECT_THROW(Scenario::parse("truncated:"), std::invalid_argument);
    EXPECT_THROW(Scenario::parse("attack"), std::invalid_argument);
}

TEST(TraceGen, DeterministicPerSeed) {
    for (auto sc : {Scenario::benign(), Scenario::full_attack(), Scenario::truncated(8)}) {
        EXPECT_EQ(generate_trace(sc, 7).serialize(), generate_trace(sc, 7).serialize());
        EXPECT_NE(generate_trace(sc, 7).serialize(), generate_trace(sc, 8).serialize());
    }
}

TEST(TraceGen, FixedSpacingAndLabAddresses) {
    const auto file = generate_trace(Scenario::full_attack(), 5);
    for (std::size_t i = 1; i < file.records.size(); ++i)
        ASSERT_EQ(file.timestamp(file.records[i]) - file.timestamp(file.records[i - 1]), Timestamp{10'000});
    for (const auto& r : file.records) {
        const auto seg = decode_frame(r.frame);
        ASSERT_TRUE(seg);
        const std::set<Ipv4> hosts = {seg->source.ip, seg->destination.ip};
        ASSERT_EQ(hosts, (std::set<Ipv4>{make_ipv4(10, 10, 10, 151), make_ipv4(10, 10, 10, 152)}));
    }
}

TEST(TraceGen, SavedFileRoundTrips) {
    const auto file = generate_trace(Scenario::full_attack(), 9);
    const auto path = temp_file("roundtrip.pcap");
    file.save(path);
    EXPECT_EQ(CaptureFile::load(path), file);
    EXPECT_EQ(read_capture(path), read_capture(file));
    std::filesystem::remove(path);
}

TEST(TraceGen, PayloadBytesAreInertFiller) {
    // Every raw-connection payload past its 8-byte prefix, and every client
    // data block outside SMB structure, is a slice of the marker pattern.
    const auto file = generate_trace(Scenario::full_attack(), 4);
    const auto events = read_capture(file);
    std::map<FlowKey, Bytes> client_raw;
    for (const auto& r : file.records) {
        const auto seg = decode_frame(r.frame);
        if (seg && seg->destination.port == kSmbPort && !seg->payload.empty()) {
            auto& s = client_raw[FlowKey{seg->source, seg->destination}];
            s.insert(s.end(), seg->payload.begin(), seg->payload.end());
        }
    }
    std::size_t raw_flows = 0;
    for (const auto& [key, stream] : client_raw) {
        if (stream.size() < 8 || stream[4] != 0xFE) continue;
        ++raw_flows;
        const Bytes prefix_free(stream.begin() + 8, stream.end());
        // Two filler runs back to back: the wave marker data and the later burst.
        const std::size_t first = 0x80;
        EXPECT_TRUE(is_inert_filler(ByteView(prefix_free).first(first)));
        EXPECT_TRUE(is_inert_filler(ByteView(prefix_free).subspan(first)));
    }
    EXPECT_EQ(raw_flows, 19u);

    for (const auto& e : events) {
        const auto* m = e.smb();
        if (!m || m->header.is_reply()) continue;
        if (m->header.command == smb::command::kSessionSetupAndX) {
            EXPECT_TRUE(is_inert_filler(m->trailing));
        }
        if (m->header.command == smb::command::kEcho) {
            EXPECT_TRUE(is_inert_filler(m->block->bytes));
        }
    }
}
