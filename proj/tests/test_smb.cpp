#include "etlab/smb.hpp"

#include "smb_gen.hpp"

#include <gtest/gtest.h>

using namespace etlab;
using namespace etlab::smb;
using etlab::testing::Gen;
using etlab::testing::random_message;

TEST(SmbWire, HeaderRoundTripsByteForByte) {
    SmbHeader h;
    h.command = command::kEcho;
    h.nt_status = 0xC0000205;
    h.flags = 0x98;
    h.flags2 = 0xC807;
    h.process_id_high = 0x1234;
    h.security_features = {1, 2, 3, 4, 5, 6, 7, 8};
    h.tree_id = 0x0800;
    h.process_id = 0xFEFF;
    h.user_id = 0x0801;
    h.multiplex_id = 0x41;
    const auto bytes = serialize_smb(make_message(h, std::nullopt), Framing::Bare);
    const Bytes expected = {0xFF, 'S',  'M',  'B',  0x2B, 0x05, 0x02, 0x00, 0xC0, 0x98, 0x07,
                            0xC8, 0x34, 0x12, 1,    2,    3,    4,    5,    6,    7,    8,
                            0x00, 0x00, 0x00, 0x08, 0xFF, 0xFE, 0x01, 0x08, 0x41, 0x00};
    EXPECT_EQ(bytes, expected);
    EXPECT_EQ(parse_smb(bytes, Framing::Bare).header, h);
}

TEST(SmbWire, NetBiosLengthIs24BitBigEndian) {
    SmbHeader h;
    h.command = command::kSessionSetupAndX;
    auto m = make_message(h, SmbBlock::from({}, {}), Bytes(0x10000 - 35, 0x5A));
    const auto framed = serialize_smb(m);
    ASSERT_EQ(framed.size(), 0x10004u);
    EXPECT_EQ(framed[0], 0x00);
    EXPECT_EQ(framed[1], 0x01);
    EXPECT_EQ(framed[2], 0x00);
    EXPECT_EQ(framed[3], 0x00);
    EXPECT_EQ(m.wire_size(), 0x10000u);
}

TEST(SmbWire, RejectsMalformedInputWithTypedErrors) {
    auto kind_of = [](Bytes b, Framing f = Framing::NetBios) {
        try {
            parse_smb(b, f);
        } catch (const SmbParseError& e) {
            return e.kind();
        }
        ADD_FAILURE() << "expected a parse error";
        return SmbParseError::Kind::TooShort;
    };
    EXPECT_EQ(kind_of({0x00, 0x00}), SmbParseError::Kind::TooShort);
    EXPECT_EQ(kind_of({0x85, 0x00, 0x00, 0x00}), SmbParseError::Kind::BadMagic);
    EXPECT_EQ(kind_of({0x00, 0x00, 0x00, 0x05, 1, 2}), SmbParseError::Kind::FrameLengthMismatch);

    Bytes smb2 = Bytes(32, 0);
    smb2[0] = 0xFE;
    smb2[1] = 'S';
    smb2[2] = 'M';
    smb2[3] = 'B';
    EXPECT_EQ(kind_of(smb2, Framing::Bare), SmbParseError::Kind::BadMagic);

    SmbHeader h;
    auto full = serialize_smb(make_message(h, SmbBlock::from(Bytes(6, 0), Bytes(10, 0))), Framing::Bare);
    full.resize(full.size() - 3);
    try {
        parse_smb(full, Framing::Bare);
        FAIL();
    } catch (const SmbParseError& e) {
        EXPECT_EQ(e.kind(), SmbParseError::Kind::TruncatedBlock);
        EXPECT_EQ(e.expected(), 10u);
        EXPECT_EQ(e.actual(), 7u);
    }
}

TEST(SmbWire, SerializeRejectsInconsistentCounts) {
    SmbMessage m;
    m.block = SmbBlock{2, Bytes(2, 0), 0, {}};
    EXPECT_THROW(serialize_smb(m), SmbInvariantError);
    m.block = SmbBlock{1, Bytes(2, 0), 3, Bytes(2, 0)};
    EXPECT_THROW(serialize_smb(m), SmbInvariantError);
}

TEST(SmbWire, TransactionEncodersDecodeBack) {
    TransactionParams p;
    p.total_data_count = 5000;
    p.setup = {subcommand::kTrans2FindFirst2};
    p.parameters = {1, 2, 3};
    p.data = {9, 8, 7, 6, 5};
    SmbHeader h;
    h.command = command::kTransaction2;
    auto m = make_message(h, encode_transaction_request(p));
    const auto& req = std::get<Trans2>(m.body).request;
    ASSERT_TRUE(req);
    EXPECT_EQ(req->subcommand(), subcommand::kTrans2FindFirst2);
    EXPECT_EQ(req->total_data_count, 5000);
    EXPECT_EQ(req->parameters, p.parameters);
    EXPECT_EQ(req->data, p.data);
    EXPECT_EQ(req->parameter_offset % 4, 0);
    EXPECT_EQ(req->data_offset % 4, 0);
    EXPECT_TRUE(m.anomalies.empty());

    NtTransParams nt;
    nt.total_data_count = 0x10400;
    nt.function = 0;
    nt.data = {0x00, 0x00, 0x01, 0x00};
    h.command = command::kNtTransact;
    auto n = make_message(h, encode_nt_trans_request(nt));
    const auto& nreq = std::get<NtTrans>(n.body).request;
    ASSERT_TRUE(nreq);
    EXPECT_EQ(nreq->total_data_count, 0x10400u);
    EXPECT_EQ(load_u32le(nreq->data.data()), 0x10000u);
}

TEST(SmbWire, OutOfRangeTransactionWindowIsAnAnomalyNotAnError) {
    TransactionParams p;
    p.setup = {1};
    p.data = {1, 2, 3, 4};
    auto block = encode_transaction_request(p);
    block.words[22] = 0xFF;  // data offset low byte
    block.words[23] = 0x7F;
    SmbHeader h;
    h.command = command::kTransaction2;
    auto m = make_message(h, block);
    EXPECT_TRUE(m.has_anomaly(Anomaly::TransactionOffsetOutOfRange));
}

TEST(SmbWire, SessionSetupSecurityMismatch) {
    SessionSetupRequest r;
    r.extended_form = true;
    r.capabilities = 0x000000D4;
    SmbHeader h;
    h.command = command::kSessionSetupAndX;
    EXPECT_TRUE(make_message(h, encode_session_setup_request(r, {})).has_anomaly(Anomaly::ExtendedSecurityMismatch));
    r.capabilities |= kCapExtendedSecurity;
    EXPECT_FALSE(make_message(h, encode_session_setup_request(r, {})).has_anomaly(Anomaly::ExtendedSecurityMismatch));
    r.extended_form = false;
    r.capabilities = 0;
    EXPECT_FALSE(make_message(h, encode_session_setup_request(r, {})).has_anomaly(Anomaly::ExtendedSecurityMismatch));
}

TEST(SmbWire, TreeConnectPathAsciiAndUnicode) {
    SmbHeader h;
    h.command = command::kTreeConnectAndX;
    auto m = make_message(h, encode_tree_connect_request("\\\\10.10.10.152\\IPC$"));
    EXPECT_EQ(std::get<TreeConnectAndX>(m.body).path, "\\\\10.10.10.152\\IPC$");

    // Unicode form: password byte, pad to even offset, UTF-16LE path.
    h.flags2 |= 0x8000;
    ByteWriter words;
    words.u8(command::kNoAndX);
    words.u8(0);
    words.u16le(0);
    words.u16le(0);
    words.u16le(1);
    ByteWriter bytes;
    bytes.u8(0);
    if ((data_block_start(4) + 1) % 2) bytes.u8(0);
    for (char c : std::string("\\\\h\\C$")) bytes.u16le(static_cast<std::uint16_t>(c));
    bytes.u16le(0);
    auto u = make_message(h, SmbBlock::from(words.take(), bytes.take()));
    EXPECT_EQ(std::get<TreeConnectAndX>(u.body).path, "\\\\h\\C$");
}

TEST(SmbWire, ProbeRequestsCarryTheirMarkers) {
    SmbHeader h;
    h.tree_id = 0x800;
    const auto peek = ProbePacket(ProbePacket::Kind::PeekNamedPipe).request(h);
    EXPECT_EQ(peek.header.command, command::kTransaction);
    EXPECT_TRUE(std::get<Trans>(peek.body).is_peek_named_pipe());

    const auto ping = ProbePacket(ProbePacket::Kind::DoublePulsarPing).request(h);
    EXPECT_EQ(ping.header.command, command::kTransaction2);
    EXPECT_EQ(ping.header.multiplex_id, 0x41);
    EXPECT_EQ(std::get<Trans2>(ping.body).request->subcommand(), 0x000E);

    EXPECT_THROW(ProbePacket(ProbePacket::Kind::PeekNamedPipe, ProbePacket::Signal::MultiplexIdValue),
                 std::invalid_argument);
    EXPECT_NO_THROW(ProbePacket(ProbePacket::Kind::DoublePulsarPing, ProbePacket::Signal::MultiplexIdValue));
}

TEST(SmbWire, ClassifiesProbeResponses) {
    SmbHeader h;
    h.flags |= kFlagsReply;
    h.command = command::kTransaction;
    h.nt_status = 0xC0000205;
    EXPECT_EQ(classify_response(make_message(h, SmbBlock{})), ResponseSignal::VulnerableMs17_010);
    h.nt_status = 0xC0000022;
    EXPECT_EQ(classify_response(make_message(h, SmbBlock{})), ResponseSignal::NoSignal);

    h.command = command::kTransaction2;
    h.nt_status = 0xC0000002;
    h.multiplex_id = 0x51;
    EXPECT_EQ(classify_response(make_message(h, SmbBlock{})), ResponseSignal::DoublePulsarPresent);
    h.multiplex_id = 0x41;
    EXPECT_EQ(classify_response(make_message(h, SmbBlock{})), ResponseSignal::DoublePulsarAbsent);

    h.flags &= static_cast<std::uint8_t>(~kFlagsReply);
    EXPECT_EQ(classify_response(make_message(h, SmbBlock{})), ResponseSignal::NoSignal);
}

TEST(SmbWireProperty, RoundTripTenThousandMessages) {
    Gen g(0x5EED);
    for (int i = 0; i < 10'000; ++i) {
        const auto m = random_message(g);
        const auto framing = g.chance(50) ? Framing::NetBios : Framing::Bare;
        const auto bytes = serialize_smb(m, framing);
        const auto back = parse_smb(bytes, framing);
        ASSERT_EQ(back, m) << "message " << i;
        ASSERT_EQ(serialize_smb(back, framing), bytes) << "message " << i;
        ASSERT_EQ(back.wire_size() + (framing == Framing::NetBios ? 4 : 0), bytes.size());
    }
}

TEST(SmbWireProperty, ParserIsTotalOnRandomInput) {
    Gen g(0xF022);
    std::vector<Bytes> seeds;
    for (int i = 0; i < 64; ++i) seeds.push_back(serialize_smb(random_message(g)));

    int parsed = 0;
    for (int i = 0; i < 100'000; ++i) {
        Bytes input;
        switch (i % 3) {
        case 0: input = g.bytes(g.range(0, 128)); break;
        case 1: {  // plausible framing over random content
            input = g.bytes(g.range(32, 200));
            input[0] = 0;
            input[1] = 0;
            input[2] = static_cast<std::uint8_t>((input.size() - 4) >> 8);
            input[3] = static_cast<std::uint8_t>(input.size() - 4);
            input[4] = 0xFF;
            input[5] = 'S';
            input[6] = 'M';
            input[7] = 'B';
            break;
        }
        default: {  // mutated valid messages
            input = seeds[g.range(0, seeds.size() - 1)];
            for (std::size_t k = g.range(1, 6); k > 0; --k) input[g.range(0, input.size() - 1)] = g.u8();
            if (g.chance(20)) input.resize(g.range(0, input.size()));
        }
        }
        try {
            const auto m = parse_smb(input);
            ++parsed;
            ASSERT_EQ(serialize_smb(m), input);
        } catch (const SmbParseError&) {
        }
    }
    EXPECT_GT(parsed, 1000);
}
