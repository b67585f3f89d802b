#include "etlab/smb.hpp"

#include <algorithm>
#include <sstream>

namespace etlab::smb {

namespace {

constexpr std::uint8_t kMagic[4] = {0xFF, 'S', 'M', 'B'};
constexpr std::uint16_t kFlags2Unicode = 0x8000;

std::string describe(SmbParseError::Kind kind) {
    switch (kind) {
    case SmbParseError::Kind::TooShort: return "too short";
    case SmbParseError::Kind::BadMagic: return "bad magic";
    case SmbParseError::Kind::TruncatedBlock: return "truncated block";
    case SmbParseError::Kind::FrameLengthMismatch: return "frame length mismatch";
    }
    return "?";
}

// Slices [offset, offset + count) out of the SMB message, flagging windows
// that fall outside it.
Bytes slice(ByteView smb, std::size_t offset, std::size_t count, std::vector<Anomaly>& anomalies) {
    if (count == 0) return {};
    if (offset > smb.size() || count > smb.size() - offset) {
        if (std::find(anomalies.begin(), anomalies.end(), Anomaly::TransactionOffsetOutOfRange) ==
            anomalies.end())
            anomalies.push_back(Anomaly::TransactionOffsetOutOfRange);
        return {};
    }
    auto s = smb.subspan(offset, count);
    return Bytes(s.begin(), s.end());
}

std::vector<std::uint16_t> read_setup(const SmbBlock& b, std::size_t first_word, std::size_t n) {
    std::vector<std::uint16_t> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(b.word(first_word + i));
    return out;
}

std::optional<TransactionRequest> decode_transaction(const SmbBlock& b, ByteView smb,
                                                     std::vector<Anomaly>& anomalies) {
    if (b.word_count < 14) return std::nullopt;
    const std::uint8_t* w = b.words.data();
    const std::uint8_t setup_count = w[26];
    if (b.word_count != 14 + setup_count) return std::nullopt;
    TransactionRequest r;
    r.total_parameter_count = load_u16le(w + 0);
    r.total_data_count = load_u16le(w + 2);
    r.max_parameter_count = load_u16le(w + 4);
    r.max_data_count = load_u16le(w + 6);
    r.max_setup_count = w[8];
    r.flags = load_u16le(w + 10);
    r.timeout = load_u32le(w + 12);
    r.parameter_count = load_u16le(w + 18);
    r.parameter_offset = load_u16le(w + 20);
    r.data_count = load_u16le(w + 22);
    r.data_offset = load_u16le(w + 24);
    r.setup = read_setup(b, 14, setup_count);
    r.parameters = slice(smb, r.parameter_offset, r.parameter_count, anomalies);
    r.data = slice(smb, r.data_offset, r.data_count, anomalies);
    return r;
}

std::optional<Trans2SecondaryRequest> decode_trans2_secondary(const SmbBlock& b, ByteView smb,
                                                              std::vector<Anomaly>& anomalies) {
    if (b.word_count != 9) return std::nullopt;
    const std::uint8_t* w = b.words.data();
    Trans2SecondaryRequest r;
    r.total_parameter_count = load_u16le(w + 0);
    r.total_data_count = load_u16le(w + 2);
    r.parameter_count = load_u16le(w + 4);
    r.parameter_offset = load_u16le(w + 6);
    r.parameter_displacement = load_u16le(w + 8);
    r.data_count = load_u16le(w + 10);
    r.data_offset = load_u16le(w + 12);
    r.data_displacement = load_u16le(w + 14);
    r.fid = load_u16le(w + 16);
    r.parameters = slice(smb, r.parameter_offset, r.parameter_count, anomalies);
    r.data = slice(smb, r.data_offset, r.data_count, anomalies);
    return r;
}

std::optional<NtTransRequest> decode_nt_trans(const SmbBlock& b, ByteView smb,
                                              std::vector<Anomaly>& anomalies) {
    if (b.word_count < 19) return std::nullopt;
    const std::uint8_t* w = b.words.data();
    const std::uint8_t setup_count = w[35];
    if (b.word_count != 19 + setup_count) return std::nullopt;
    NtTransRequest r;
    r.max_setup_count = w[0];
    r.total_parameter_count = load_u32le(w + 3);
    r.total_data_count = load_u32le(w + 7);
    r.max_parameter_count = load_u32le(w + 11);
    r.max_data_count = load_u32le(w + 15);
    r.parameter_count = load_u32le(w + 19);
    r.parameter_offset = load_u32le(w + 23);
    r.data_count = load_u32le(w + 27);
    r.data_offset = load_u32le(w + 31);
    r.function = load_u16le(w + 36);
    r.setup = read_setup(b, 19, setup_count);
    r.parameters = slice(smb, r.parameter_offset, r.parameter_count, anomalies);
    r.data = slice(smb, r.data_offset, r.data_count, anomalies);
    return r;
}

std::optional<SessionSetupRequest> decode_session_setup(const SmbBlock& b,
                                                        std::vector<Anomaly>& anomalies) {
    if (b.word_count != 10 && b.word_count != 12 && b.word_count != 13) return std::nullopt;
    const std::uint8_t* w = b.words.data();
    SessionSetupRequest r;
    r.andx_command = w[0];
    r.andx_offset = load_u16le(w + 2);
    r.max_buffer_size = load_u16le(w + 4);
    r.max_mpx_count = load_u16le(w + 6);
    r.vc_number = load_u16le(w + 8);
    r.session_key = load_u32le(w + 10);
    if (b.word_count == 12) {
        r.extended_form = true;
        r.security_blob_length = load_u16le(w + 14);
        r.capabilities = load_u32le(w + 20);
        if ((r.capabilities & kCapExtendedSecurity) == 0)
            anomalies.push_back(Anomaly::ExtendedSecurityMismatch);
    } else if (b.word_count == 13) {
        r.capabilities = load_u32le(w + 22);
    }
    return r;
}

std::vector<std::string> decode_dialects(const Bytes& bytes) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < bytes.size() && bytes[i] == 0x02) {
        auto end = std::find(bytes.begin() + static_cast<std::ptrdiff_t>(i) + 1, bytes.end(), 0);
        if (end == bytes.end()) break;
        out.emplace_back(bytes.begin() + static_cast<std::ptrdiff_t>(i) + 1, end);
        i = static_cast<std::size_t>(end - bytes.begin()) + 1;
    }
    return out;
}

std::optional<std::string> decode_tree_path(const SmbHeader& h, const SmbBlock& b) {
    if (b.word_count != 4) return std::nullopt;
    const std::size_t password_length = b.word(3);
    if (password_length > b.bytes.size()) return std::nullopt;
    std::size_t i = password_length;
    std::string path;
    if (h.flags2 & kFlags2Unicode) {
        // UTF-16LE, aligned to an even offset from the SMB header.
        if ((data_block_start(b.word_count) + i) % 2) ++i;
        for (; i + 1 < b.bytes.size(); i += 2) {
            const std::uint16_t c = load_u16le(b.bytes.data() + i);
            if (c == 0) return path;
            path.push_back(c < 0x80 ? static_cast<char>(c) : '?');
        }
        return std::nullopt;
    }
    for (; i < b.bytes.size(); ++i) {
        if (b.bytes[i] == 0) return path;
        path.push_back(static_cast<char>(b.bytes[i]));
    }
    return std::nullopt;
}

template <typename T>
void note_layout(const std::optional<T>& decoded, const SmbHeader& h,
                 std::vector<Anomaly>& anomalies) {
    if (!decoded && !h.is_reply()) anomalies.push_back(Anomaly::UnexpectedWordCount);
}

SmbCommandBody decode_body(const SmbHeader& h, const std::optional<SmbBlock>& block, ByteView smb,
                           std::vector<Anomaly>& anomalies) {
    const bool request = !h.is_reply();
    switch (h.command) {
    case command::kNegotiate: {
        Negotiate n;
        if (block && request) {
            if (block->word_count != 0) anomalies.push_back(Anomaly::UnexpectedWordCount);
            n.dialects = decode_dialects(block->bytes);
        }
        return n;
    }
    case command::kSessionSetupAndX: {
        SessionSetupAndX s;
        if (block && request) {
            s.request = decode_session_setup(*block, anomalies);
            note_layout(s.request, h, anomalies);
        }
        return s;
    }
    case command::kTreeConnectAndX: {
        TreeConnectAndX t;
        if (block && request) t.path = decode_tree_path(h, *block);
        return t;
    }
    case command::kEcho: {
        Echo e;
        if (block && request && block->word_count == 1) e.echo_count = block->word(0);
        return e;
    }
    case command::kTransaction: {
        Trans t;
        if (block && request) {
            t.request = decode_transaction(*block, smb, anomalies);
            note_layout(t.request, h, anomalies);
        }
        return t;
    }
    case command::kTransaction2: {
        Trans2 t;
        if (block && request) {
            t.request = decode_transaction(*block, smb, anomalies);
            note_layout(t.request, h, anomalies);
        }
        return t;
    }
    case command::kTransaction2Secondary: {
        Trans2Secondary t;
        if (block && request) {
            t.request = decode_trans2_secondary(*block, smb, anomalies);
            note_layout(t.request, h, anomalies);
        }
        return t;
    }
    case command::kNtTransact: {
        NtTrans t;
        if (block && request) {
            t.request = decode_nt_trans(*block, smb, anomalies);
            note_layout(t.request, h, anomalies);
        }
        return t;
    }
    default: return Opaque{};
    }
}

void write_header(ByteWriter& w, const SmbHeader& h) {
    w.bytes(kMagic);
    w.u8(h.command);
    w.u32le(h.nt_status);
    w.u8(h.flags);
    w.u16le(h.flags2);
    w.u16le(h.process_id_high);
    w.bytes(h.security_features);
    w.u16le(h.reserved);
    w.u16le(h.tree_id);
    w.u16le(h.process_id);
    w.u16le(h.user_id);
    w.u16le(h.multiplex_id);
}

Bytes serialize_bare(const SmbMessage& msg) {
    ByteWriter w;
    write_header(w, msg.header);
    if (msg.block) {
        const auto& b = *msg.block;
        if (b.words.size() != 2u * b.word_count)
            throw SmbInvariantError("word_count " + std::to_string(b.word_count) +
                                    " disagrees with " + std::to_string(b.words.size()) +
                                    " parameter bytes");
        if (b.bytes.size() != b.byte_count)
            throw SmbInvariantError("byte_count " + std::to_string(b.byte_count) +
                                    " disagrees with " + std::to_string(b.bytes.size()) +
                                    " data bytes");
        w.u8(b.word_count);
        w.bytes(b.words);
        w.u16le(b.byte_count);
        w.bytes(b.bytes);
    } else if (!msg.trailing.empty()) {
        throw SmbInvariantError("trailing bytes without a command block");
    }
    w.bytes(msg.trailing);
    return w.take();
}

// Lays out [name][pad][parameters][pad][data] at the start of a data block
// and reports where parameters and data ended up relative to the header.
struct Placement {
    Bytes bytes;
    std::size_t parameter_offset = 0;
    std::size_t data_offset = 0;
};

Placement place(std::size_t word_count, const std::string& name, ByteView parameters,
                ByteView data) {
    const std::size_t base = data_block_start(word_count);
    ByteWriter w;
    if (!name.empty()) {
        w.text(name);
        w.u8(0);
    }
    auto pad4 = [&] {
        while ((base + w.size()) % 4) w.u8(0);
    };
    pad4();
    Placement p;
    p.parameter_offset = base + w.size();
    w.bytes(parameters);
    pad4();
    p.data_offset = base + w.size();
    w.bytes(data);
    p.bytes = w.take();
    return p;
}

}  // namespace

SmbParseError::SmbParseError(Kind kind, std::size_t offset, std::size_t expected,
                             std::size_t actual)
    : std::runtime_error("smb parse error: " + describe(kind) + " at offset " +
                         std::to_string(offset) + " (expected " + std::to_string(expected) +
                         ", got " + std::to_string(actual) + ")"),
      kind_(kind),
      offset_(offset),
      expected_(expected),
      actual_(actual) {}

std::string to_string(Anomaly a) {
    switch (a) {
    case Anomaly::TrailingBytes: return "TrailingBytes";
    case Anomaly::UnexpectedWordCount: return "UnexpectedWordCount";
    case Anomaly::ExtendedSecurityMismatch: return "ExtendedSecurityMismatch";
    case Anomaly::TransactionOffsetOutOfRange: return "TransactionOffsetOutOfRange";
    }
    return "?";
}

SmbBlock SmbBlock::from(Bytes words, Bytes bytes) {
    if (words.size() % 2 || words.size() > 2 * 255)
        throw SmbInvariantError("parameter block must hold at most 255 whole words");
    if (bytes.size() > 0xFFFF) throw SmbInvariantError("data block exceeds 65535 bytes");
    SmbBlock b;
    b.word_count = static_cast<std::uint8_t>(words.size() / 2);
    b.byte_count = static_cast<std::uint16_t>(bytes.size());
    b.words = std::move(words);
    b.bytes = std::move(bytes);
    return b;
}

std::uint16_t SmbBlock::word(std::size_t i) const {
    return 2 * i + 1 < words.size() ? load_u16le(words.data() + 2 * i) : 0;
}

bool SmbMessage::has_anomaly(Anomaly a) const {
    return std::find(anomalies.begin(), anomalies.end(), a) != anomalies.end();
}

std::size_t SmbMessage::wire_size() const {
    std::size_t n = kHeaderSize + trailing.size();
    if (block) n += 1 + block->words.size() + 2 + block->bytes.size();
    return n;
}

SmbMessage parse_smb(ByteView in, Framing framing) {
    std::size_t base = 0;
    ByteView smb = in;
    if (framing == Framing::NetBios) {
        if (in.size() < kNetBiosHeaderSize)
            throw SmbParseError(SmbParseError::Kind::TooShort, 0, kNetBiosHeaderSize, in.size());
        if (in[0] != 0x00) throw SmbParseError(SmbParseError::Kind::BadMagic, 0, 0x00, in[0]);
        const std::size_t declared = (std::size_t{in[1]} << 16) | (std::size_t{in[2]} << 8) | in[3];
        if (declared != in.size() - kNetBiosHeaderSize)
            throw SmbParseError(SmbParseError::Kind::FrameLengthMismatch, 1, declared,
                                in.size() - kNetBiosHeaderSize);
        base = kNetBiosHeaderSize;
        smb = in.subspan(base);
    }
    if (smb.size() < kHeaderSize)
        throw SmbParseError(SmbParseError::Kind::TooShort, base, kHeaderSize, smb.size());
    if (!std::equal(std::begin(kMagic), std::end(kMagic), smb.begin()))
        throw SmbParseError(SmbParseError::Kind::BadMagic, base, 0xFF534D42,
                            (std::size_t{smb[0]} << 24) | (std::size_t{smb[1]} << 16) |
                                (std::size_t{smb[2]} << 8) | smb[3]);

    SmbMessage msg;
    ByteReader r(smb, 4);
    auto& h = msg.header;
    h.command = *r.u8();
    h.nt_status = *r.u32le();
    h.flags = *r.u8();
    h.flags2 = *r.u16le();
    h.process_id_high = *r.u16le();
    auto sec = *r.take(8);
    std::copy(sec.begin(), sec.end(), h.security_features.begin());
    h.reserved = *r.u16le();
    h.tree_id = *r.u16le();
    h.process_id = *r.u16le();
    h.user_id = *r.u16le();
    h.multiplex_id = *r.u16le();

    if (!r.at_end()) {
        SmbBlock b;
        b.word_count = *r.u8();
        auto words = r.take(2u * b.word_count);
        if (!words)
            throw SmbParseError(SmbParseError::Kind::TruncatedBlock, base + r.offset(),
                                2u * b.word_count, r.remaining());
        b.words.assign(words->begin(), words->end());
        auto bc = r.u16le();
        if (!bc)
            throw SmbParseError(SmbParseError::Kind::TruncatedBlock, base + r.offset(), 2,
                                r.remaining());
        b.byte_count = *bc;
        auto bytes = r.take(b.byte_count);
        if (!bytes)
            throw SmbParseError(SmbParseError::Kind::TruncatedBlock, base + r.offset(),
                                b.byte_count, r.remaining());
        b.bytes.assign(bytes->begin(), bytes->end());
        msg.block = std::move(b);
        auto rest = smb.subspan(r.offset());
        msg.trailing.assign(rest.begin(), rest.end());
        if (!msg.trailing.empty()) msg.anomalies.push_back(Anomaly::TrailingBytes);
    }
    msg.body = decode_body(h, msg.block, smb, msg.anomalies);
    return msg;
}

Bytes serialize_smb(const SmbMessage& msg, Framing framing) {
    Bytes smb = serialize_bare(msg);
    if (framing == Framing::Bare) return smb;
    if (smb.size() > 0xFFFFFF) throw SmbInvariantError("message too large for NetBIOS framing");
    ByteWriter w;
    w.u8(0x00);
    w.u8(static_cast<std::uint8_t>(smb.size() >> 16));
    w.u16be(static_cast<std::uint16_t>(smb.size()));
    w.bytes(smb);
    return w.take();
}

SmbMessage make_message(const SmbHeader& header, std::optional<SmbBlock> block, Bytes trailing) {
    SmbMessage m;
    m.header = header;
    m.block = std::move(block);
    m.trailing = std::move(trailing);
    return parse_smb(serialize_smb(m, Framing::Bare), Framing::Bare);
}

SmbBlock encode_transaction_request(const TransactionParams& p) {
    const std::size_t wc = 14 + p.setup.size();
    auto placed = place(wc, p.name, p.parameters, p.data);
    ByteWriter w;
    w.u16le(p.total_parameter_count ? p.total_parameter_count
                                    : static_cast<std::uint16_t>(p.parameters.size()));
    w.u16le(p.total_data_count ? p.total_data_count : static_cast<std::uint16_t>(p.data.size()));
    w.u16le(p.max_parameter_count);
    w.u16le(p.max_data_count);
    w.u8(p.max_setup_count);
    w.u8(0);
    w.u16le(p.flags);
    w.u32le(p.timeout);
    w.u16le(0);
    w.u16le(static_cast<std::uint16_t>(p.parameters.size()));
    w.u16le(static_cast<std::uint16_t>(placed.parameter_offset));
    w.u16le(static_cast<std::uint16_t>(p.data.size()));
    w.u16le(static_cast<std::uint16_t>(placed.data_offset));
    w.u8(static_cast<std::uint8_t>(p.setup.size()));
    w.u8(0);
    for (auto s : p.setup) w.u16le(s);
    return SmbBlock::from(w.take(), std::move(placed.bytes));
}

SmbBlock encode_trans2_secondary(const Trans2SecondaryParams& p) {
    auto placed = place(9, {}, p.parameters, p.data);
    ByteWriter w;
    w.u16le(p.total_parameter_count);
    w.u16le(p.total_data_count);
    w.u16le(static_cast<std::uint16_t>(p.parameters.size()));
    w.u16le(static_cast<std::uint16_t>(placed.parameter_offset));
    w.u16le(p.parameter_displacement);
    w.u16le(static_cast<std::uint16_t>(p.data.size()));
    w.u16le(static_cast<std::uint16_t>(placed.data_offset));
    w.u16le(p.data_displacement);
    w.u16le(p.fid);
    return SmbBlock::from(w.take(), std::move(placed.bytes));
}

SmbBlock encode_nt_trans_request(const NtTransParams& p) {
    const std::size_t wc = 19 + p.setup.size();
    auto placed = place(wc, {}, p.parameters, p.data);
    ByteWriter w;
    w.u8(p.max_setup_count);
    w.u16le(0);
    w.u32le(p.total_parameter_count ? p.total_parameter_count
                                    : static_cast<std::uint32_t>(p.parameters.size()));
    w.u32le(p.total_data_count ? p.total_data_count : static_cast<std::uint32_t>(p.data.size()));
    w.u32le(p.max_parameter_count);
    w.u32le(p.max_data_count);
    w.u32le(static_cast<std::uint32_t>(p.parameters.size()));
    w.u32le(static_cast<std::uint32_t>(placed.parameter_offset));
    w.u32le(static_cast<std::uint32_t>(p.data.size()));
    w.u32le(static_cast<std::uint32_t>(placed.data_offset));
    w.u8(static_cast<std::uint8_t>(p.setup.size()));
    w.u16le(p.function);
    for (auto s : p.setup) w.u16le(s);
    // 38 bytes of fixed fields plus setup; pad to a whole word.
    w.pad_to(2);
    return SmbBlock::from(w.take(), std::move(placed.bytes));
}

SmbBlock encode_negotiate_request(const std::vector<std::string>& dialects) {
    ByteWriter w;
    for (const auto& d : dialects) {
        w.u8(0x02);
        w.text(d);
        w.u8(0);
    }
    return SmbBlock::from({}, w.take());
}

SmbBlock encode_session_setup_request(const SessionSetupRequest& r, ByteView data) {
    ByteWriter w;
    w.u8(r.andx_command);
    w.u8(0);
    w.u16le(r.andx_offset);
    w.u16le(r.max_buffer_size);
    w.u16le(r.max_mpx_count);
    w.u16le(r.vc_number);
    w.u32le(r.session_key);
    if (r.extended_form) {
        w.u16le(r.security_blob_length);
        w.u32le(0);
        w.u32le(r.capabilities);
    } else {
        w.u16le(0);  // OEM password length
        w.u16le(0);  // Unicode password length
        w.u32le(0);
        w.u32le(r.capabilities);
    }
    return SmbBlock::from(w.take(), Bytes(data.begin(), data.end()));
}

SmbBlock encode_tree_connect_request(const std::string& path) {
    ByteWriter words;
    words.u8(command::kNoAndX);
    words.u8(0);
    words.u16le(0);
    words.u16le(0);  // flags
    words.u16le(1);  // password length
    ByteWriter bytes;
    bytes.u8(0);
    bytes.text(path);
    bytes.u8(0);
    bytes.text("?????");
    bytes.u8(0);
    return SmbBlock::from(words.take(), bytes.take());
}

SmbBlock encode_echo_request(std::uint16_t echo_count, ByteView data) {
    ByteWriter w;
    w.u16le(echo_count);
    return SmbBlock::from(w.take(), Bytes(data.begin(), data.end()));
}

std::string to_string(ResponseSignal s) {
    switch (s) {
    case ResponseSignal::VulnerableMs17_010: return "VulnerableMs17_010";
    case ResponseSignal::DoublePulsarPresent: return "DoublePulsarPresent";
    case ResponseSignal::DoublePulsarAbsent: return "DoublePulsarAbsent";
    case ResponseSignal::NoSignal: return "NoSignal";
    }
    return "?";
}

ResponseSignal classify_response(const SmbMessage& msg) {
    const auto& h = msg.header;
    if (!h.is_reply()) return ResponseSignal::NoSignal;
    if (h.command == command::kTransaction && h.nt_status == status::kInsuffServerResources)
        return ResponseSignal::VulnerableMs17_010;
    if (h.command == command::kTransaction2) {
        if (h.multiplex_id == kDoublePulsarPresentMid) return ResponseSignal::DoublePulsarPresent;
        if (h.multiplex_id == kDoublePulsarAbsentMid) return ResponseSignal::DoublePulsarAbsent;
    }
    return ResponseSignal::NoSignal;
}

ProbePacket::ProbePacket(Kind kind, Signal signal) : kind_(kind), signal_(signal) {
    if (signal != signal_for(kind))
        throw std::invalid_argument("probe kind does not produce that response signal");
}

SmbMessage ProbePacket::request(SmbHeader header) const {
    header.flags &= static_cast<std::uint8_t>(~kFlagsReply);
    header.nt_status = 0;
    if (kind_ == Kind::PeekNamedPipe) {
        header.command = command::kTransaction;
        TransactionParams p;
        p.max_parameter_count = 0xFFFF;
        p.max_data_count = 0x0800;
        p.setup = {subcommand::kPeekNamedPipe, 0x0000};
        p.name = "\\PIPE\\";
        return make_message(header, encode_transaction_request(p));
    }
    header.command = command::kTransaction2;
    header.multiplex_id = kDoublePulsarAbsentMid;
    TransactionParams p;
    p.max_parameter_count = 1;
    p.setup = {subcommand::kTrans2SessionSetup};
    p.parameters = Bytes(12, 0);
    return make_message(header, encode_transaction_request(p));
}

std::string command_name(std::uint8_t c) {
    switch (c) {
    case command::kTransaction: return "Trans";
    case command::kEcho: return "Echo";
    case command::kTransaction2: return "Trans2";
    case command::kTransaction2Secondary: return "Trans2Secondary";
    case command::kNegotiate: return "Negotiate";
    case command::kSessionSetupAndX: return "SessionSetupAndX";
    case command::kTreeConnectAndX: return "TreeConnectAndX";
    case command::kNtTransact: return "NtTrans";
    case command::kNtTransactSecondary: return "NtTransSecondary";
    default: return hex(c, 2);
    }
}

}  // namespace etlab::smb
