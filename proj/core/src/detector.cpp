#include "etlab/detector.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <set>
#include <sstream>

namespace etlab::detect {

namespace {

constexpr std::array<std::string_view, 14> kStageNames = {
    "Idle",         "Probe",       "ListUpload",   "ListEcho", "Reserve1", "SrvnetWave1", "Reserve2",
    "FreeReserve1", "SrvnetWave2", "WaveEcho", "FreeReserve2", "Trigger", "Payload", "Complete"};

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string seconds(Timestamp t) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%lld.%06lld", static_cast<long long>(t.count() / 1'000'000),
                  static_cast<long long>(t.count() % 1'000'000));
    return buf;
}

}  // namespace

std::string to_string(AttackStage s) { return std::string(kStageNames[static_cast<std::size_t>(s)]); }

std::optional<AttackStage> parse_stage(std::string_view text) {
    std::string t = lower(text);
    if (t.rfind("stage-", 0) == 0) t = t.substr(6);
    int n = -1;
    auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), n);
    if (ec == std::errc{} && end == t.data() + t.size()) {
        if (n >= 0 && n < static_cast<int>(kStageNames.size())) return static_cast<AttackStage>(n);
        return std::nullopt;
    }
    for (std::size_t i = 0; i < kStageNames.size(); ++i)
        if (lower(kStageNames[i]) == t) return static_cast<AttackStage>(i);
    return std::nullopt;
}

std::string to_string(AnomalyTag t) {
    switch (t) {
    case AnomalyTag::PeekNamedPipeProbe: return "PeekNamedPipeProbe";
    case AnomalyTag::DoublePulsarPing: return "DoublePulsarPing";
    case AnomalyTag::VulnerableProbeResponse: return "VulnerableProbeResponse";
    case AnomalyTag::DoublePulsarPresent: return "DoublePulsarPresent";
    case AnomalyTag::TransactionTypeMismatch: return "TransactionTypeMismatch";
    case AnomalyTag::OversizedFeaList: return "OversizedFeaList";
    case AnomalyTag::OversizedNonPagedPoolReserve: return "OversizedNonPagedPoolReserve";
    case AnomalyTag::NonSmbDataOnSmbPort: return "NonSmbDataOnSmbPort";
    }
    return "?";
}

std::string to_string(Verdict v) {
    switch (v) {
    case Verdict::Benign: return "Benign";
    case Verdict::Suspicious: return "Suspicious";
    case Verdict::EternalblueSequence: return "EternalblueSequence";
    }
    return "?";
}

std::string to_text(const DetectionReport& r) {
    std::ostringstream out;
    out << "report\n";
    out << "  attacker: " << format_ipv4(r.attacker) << "\n";
    out << "  victim: " << format_ipv4(r.victim) << "\n";
    out << "  verdict: " << to_string(r.verdict) << "\n";
    out << "  max_stage: " << stage_number(r.max_stage) << " " << to_string(r.max_stage) << "\n";
    out << "  stages:\n";
    for (const auto& [stage, ts] : r.stage_timestamps)
        out << "    " << stage_number(stage) << " " << to_string(stage) << " " << seconds(ts) << "\n";
    out << "  anomalies:";
    if (r.anomalies.empty()) out << " none";
    for (auto a : r.anomalies) out << " " << to_string(a);
    out << "\n";
    return out.str();
}

OutOfOrderEvent::OutOfOrderEvent(const FlowKey& flow, Timestamp previous, Timestamp got)
    : std::runtime_error("event at " + seconds(got) + " precedes " + seconds(previous) + " on flow " +
                         to_string(flow.client) + " -> " + to_string(flow.server)) {}

UnknownHost::UnknownHost(Ipv4 host) : std::runtime_error("no events from host " + format_ipv4(host)) {}

// -- state machine ---------------------------------------------------------

namespace {

struct FlowInfo {
    std::optional<Timestamp> last;
    std::optional<Timestamp> opened;
    bool client_data_seen = false;
    bool raw = false;                         // first client data did not frame as SMB
    std::map<std::uint16_t, std::uint8_t> open_transactions;  // mid -> primary command
    std::set<std::uint8_t> probes_sent;                        // commands
};

}  // namespace

struct GroomDetector::PairState {
    std::mutex mutex;
    AttackStage current = AttackStage::Idle;
    AttackStage max_stage = AttackStage::Idle;
    std::map<AttackStage, Timestamp> stamps;
    std::vector<AnomalyTag> anomalies;
    std::optional<Timestamp> last_event;

    std::map<FlowKey, FlowInfo> flows;
    std::optional<FlowKey> upload, reserve1, reserve2;
    std::vector<std::pair<FlowKey, Timestamp>> wave_candidates;
    std::set<FlowKey> wave_flows, payload_flows;

    void tag(AnomalyTag t) {
        if (std::find(anomalies.begin(), anomalies.end(), t) == anomalies.end()) anomalies.push_back(t);
    }

    void reset() {
        current = AttackStage::Idle;
        upload.reset();
        reserve1.reset();
        reserve2.reset();
        wave_candidates.clear();
        wave_flows.clear();
        payload_flows.clear();
    }
};

GroomDetector::GroomDetector(DetectorConfig config) : config_(config) {}
GroomDetector::~GroomDetector() = default;

GroomDetector::PairState& GroomDetector::state_for(const PairKey& key) {
    {
        std::shared_lock lock(registry_mutex_);
        if (auto it = pairs_.find(key); it != pairs_.end()) return *it->second;
    }
    std::unique_lock lock(registry_mutex_);
    auto& slot = pairs_[key];
    if (!slot) slot = std::make_unique<PairState>();
    return *slot;
}

std::optional<StageTransition> GroomDetector::feed(const FlowEvent& e) {
    const PairKey key{e.flow.client.ip, e.flow.server.ip};
    PairState& s = state_for(key);
    std::lock_guard lock(s.mutex);

    FlowInfo& flow = s.flows[e.flow];
    if (flow.last && e.timestamp < *flow.last) throw OutOfOrderEvent(e.flow, *flow.last, e.timestamp);
    flow.last = e.timestamp;
    if (!flow.opened) flow.opened = e.timestamp;

    if (s.current != AttackStage::Idle && s.last_event && e.timestamp - *s.last_event > config_.stage_timeout)
        s.reset();
    s.last_event = std::max(s.last_event.value_or(e.timestamp), e.timestamp);

    std::optional<AttackStage> next;
    const auto at = [&](std::initializer_list<AttackStage> stages) {
        return std::find(stages.begin(), stages.end(), s.current) != stages.end();
    };
    const bool to_server = e.direction == Direction::ClientToServer;

    if (std::holds_alternative<RawTcpOpen>(e.kind)) {
        flow.opened = e.timestamp;
    } else if (const auto* m = e.smb()) {
        if (to_server) flow.client_data_seen = true;
        const auto& h = m->header;
        if (h.is_reply()) {
            // Reply signals only count as answers to a probe seen on the same flow.
            const auto signal = flow.probes_sent.count(h.command) ? smb::classify_response(*m)
                                                                   : smb::ResponseSignal::NoSignal;
            if (signal == smb::ResponseSignal::VulnerableMs17_010) s.tag(AnomalyTag::VulnerableProbeResponse);
            if (signal == smb::ResponseSignal::DoublePulsarPresent) s.tag(AnomalyTag::DoublePulsarPresent);
            if (signal != smb::ResponseSignal::NoSignal && at({AttackStage::Idle})) next = AttackStage::Probe;
        } else if (const auto* t = std::get_if<smb::Trans>(&m->body); t && t->is_peek_named_pipe()) {
            s.tag(AnomalyTag::PeekNamedPipeProbe);
            flow.probes_sent.insert(h.command);
            if (at({AttackStage::Idle})) next = AttackStage::Probe;
        } else if (const auto* t2 = std::get_if<smb::Trans2>(&m->body)) {
            flow.open_transactions[h.multiplex_id] = h.command;
            if (t2->request && t2->request->subcommand() == smb::subcommand::kTrans2SessionSetup) {
                s.tag(AnomalyTag::DoublePulsarPing);
                flow.probes_sent.insert(h.command);
                if (at({AttackStage::Idle})) next = AttackStage::Probe;
            }
        } else if (const auto* nt = std::get_if<smb::NtTrans>(&m->body)) {
            flow.open_transactions[h.multiplex_id] = h.command;
            // A list that large needs a transaction whose total data count is beyond 16 bits.
            if (nt->request && nt->request->data.size() >= 4 &&
                load_u32le(nt->request->data.data()) >= config_.oversized_list &&
                nt->request->total_data_count >= config_.oversized_list)
                s.tag(AnomalyTag::OversizedFeaList);
        } else if (std::holds_alternative<smb::Trans2Secondary>(m->body)) {
            auto it = flow.open_transactions.find(h.multiplex_id);
            const bool mismatch = it != flow.open_transactions.end() && it->second == smb::command::kNtTransact;
            if (mismatch) {
                s.tag(AnomalyTag::TransactionTypeMismatch);
                if (at({AttackStage::Idle, AttackStage::Probe})) {
                    next = AttackStage::ListUpload;
                    s.upload = e.flow;
                } else if (at({AttackStage::FreeReserve2}) && s.upload == e.flow) {
                    next = AttackStage::Trigger;
                }
            }
        } else if (std::holds_alternative<smb::Echo>(m->body)) {
            if (s.upload == e.flow) {
                if (at({AttackStage::ListUpload})) next = AttackStage::ListEcho;
                else if (at({AttackStage::SrvnetWave2})) next = AttackStage::WaveEcho;
            }
        } else if (const auto* ss = std::get_if<smb::SessionSetupAndX>(&m->body)) {
            if (ss->request && m->has_anomaly(smb::Anomaly::ExtendedSecurityMismatch) &&
                m->wire_size() >= config_.oversized_reserve) {
                s.tag(AnomalyTag::OversizedNonPagedPoolReserve);
                if (at({AttackStage::ListUpload, AttackStage::ListEcho})) {
                    next = AttackStage::Reserve1;
                    s.reserve1 = e.flow;
                    s.wave_candidates.clear();
                } else if (at({AttackStage::SrvnetWave1})) {
                    next = AttackStage::Reserve2;
                    s.reserve2 = e.flow;
                }
            }
        }
    } else if (const auto* raw = std::get_if<RawTcpData>(&e.kind)) {
        if (to_server && !flow.client_data_seen) {
            flow.client_data_seen = true;
            flow.raw = true;
            s.tag(AnomalyTag::NonSmbDataOnSmbPort);
        }
        if (to_server && flow.raw && raw->bytes > 0) {
            if (at({AttackStage::Trigger, AttackStage::Payload}) && s.wave_flows.count(e.flow)) {
                s.payload_flows.insert(e.flow);
                if (at({AttackStage::Trigger})) next = AttackStage::Payload;
            } else if (at({AttackStage::SrvnetWave1, AttackStage::SrvnetWave2, AttackStage::WaveEcho})) {
                s.wave_flows.insert(e.flow);
            } else if (at({AttackStage::Reserve1, AttackStage::FreeReserve1}) && !s.wave_flows.count(e.flow)) {
                auto& c = s.wave_candidates;
                if (std::none_of(c.begin(), c.end(), [&](const auto& p) { return p.first == e.flow; }))
                    c.emplace_back(e.flow, *flow.opened);
                const Timestamp newest = *flow.opened;
                std::erase_if(c, [&](const auto& p) { return newest - p.second > config_.stage_timeout; });
                if (c.size() >= config_.wave_min_connections) {
                    next = at({AttackStage::Reserve1}) ? AttackStage::SrvnetWave1 : AttackStage::SrvnetWave2;
                    for (const auto& p : c) s.wave_flows.insert(p.first);
                    c.clear();
                }
            }
        }
    } else if (std::holds_alternative<TcpFin>(e.kind)) {
        if (at({AttackStage::Reserve2}) && s.reserve1 == e.flow) next = AttackStage::FreeReserve1;
        else if (at({AttackStage::SrvnetWave2, AttackStage::WaveEcho}) && s.reserve2 == e.flow)
            next = AttackStage::FreeReserve2;
        else if (at({AttackStage::Payload}) && s.payload_flows.count(e.flow))
            next = AttackStage::Complete;
    }

    if (!next) return std::nullopt;
    StageTransition tr{key.first, key.second, s.current, *next, e.timestamp};
    s.current = *next;
    s.max_stage = std::max(s.max_stage, *next);
    s.stamps[*next] = e.timestamp;
    return tr;
}

DetectionReport GroomDetector::report(const PairKey& key, const PairState& s) const {
    DetectionReport r;
    r.attacker = key.first;
    r.victim = key.second;
    r.max_stage = s.max_stage;
    r.stage_timestamps = s.stamps;
    r.anomalies = s.anomalies;
    if (s.max_stage >= config_.conviction_stage)
        r.verdict = Verdict::EternalblueSequence;
    else if (s.max_stage >= AttackStage::Probe)
        r.verdict = Verdict::Suspicious;
    return r;
}

std::vector<DetectionReport> GroomDetector::finalize(Ipv4 attacker) const {
    std::vector<DetectionReport> out;
    std::shared_lock lock(registry_mutex_);
    for (auto it = pairs_.lower_bound({attacker, 0}); it != pairs_.end() && it->first.first == attacker; ++it) {
        std::lock_guard pair_lock(it->second->mutex);
        out.push_back(report(it->first, *it->second));
    }
    if (out.empty()) throw UnknownHost(attacker);
    return out;
}

std::vector<DetectionReport> GroomDetector::finalize_all() const {
    std::vector<DetectionReport> out;
    std::shared_lock lock(registry_mutex_);
    for (const auto& [key, state] : pairs_) {
        std::lock_guard pair_lock(state->mutex);
        out.push_back(report(key, *state));
    }
    return out;
}

// -- rules and glossary ------------------------------------------------------

RuleDocument emit_rules(const DetectorConfig& config) {
    RuleDocument d;
    auto add = [&](std::string id, AttackStage stage, std::string title, std::vector<std::string> conditions) {
        d.rules.push_back({std::move(id), stage, std::move(title), std::move(conditions)});
    };
    add("probe-peek-named-pipe", AttackStage::Probe, "MS17-010 reachability probe",
        {"SMB1 Trans request (command 0x25), setup[0] = 0x0023 PeekNamedPipe, FID 0, name \\PIPE\\",
         "server reply nt_status = 0xC0000205 (STATUS_INSUFF_SERVER_RESOURCES) marks the host unpatched"});
    add("probe-backdoor-ping", AttackStage::Probe, "Backdoor presence ping",
        {"SMB1 Trans2 request (command 0x32), setup[0] = 0x000E SESSION_SETUP, multiplex_id = 0x41",
         "reply multiplex_id = 0x51: implant present; multiplex_id = 0x41: implant absent"});
    add("list-upload-mismatch", AttackStage::ListUpload, "Trans2 Secondary continuing an NT Trans",
        {"NT Trans request (command 0xA0) opens a transaction on multiplex_id M",
         "Trans2 Secondary request (command 0x33) with the same multiplex_id M on the same connection",
         "legitimate clients continue an NT Trans only with NT Trans Secondary (command 0xA1)",
         "tag: TransactionTypeMismatch"});
    add("fea-size-of-list", AttackStage::ListUpload, "Oversized extended-attribute list",
        {"first 4 bytes of the NT Trans data (FEA list SizeOfList field) >= " + hex(config.oversized_list, 8),
         "canonical value SizeOfList = 0x00010000 with total data count above 0xFFFF",
         "tag: OversizedFeaList"});
    add("list-echo", AttackStage::ListEcho, "Echo after the partial upload",
        {"SMB1 Echo request (command 0x2B) on the upload connection while the transaction is still open"});
    add("pool-reserve", AttackStage::Reserve1, "Oversized session setup reservation",
        {"Session Setup AndX request (command 0x73) with 12 parameter words",
         "capabilities lack CAP_EXTENDED_SECURITY (0x80000000) although the 12-word form requires it",
         "NetBIOS-declared SMB message size >= " + hex(config.oversized_reserve, 5),
         "tag: OversizedNonPagedPoolReserve"});
    add("raw-wave-1", AttackStage::SrvnetWave1, "First burst of non-SMB connections",
        {">= " + std::to_string(config.wave_min_connections) +
             " new connections to port 445 whose first client data does not frame as SMB1",
         "tag: NonSmbDataOnSmbPort"});
    add("pool-reserve-2", AttackStage::Reserve2, "Second oversized reservation",
        {"same as pool-reserve on a new connection, after raw-wave-1"});
    add("free-reserve-1", AttackStage::FreeReserve1, "First reservation released",
        {"FIN or RST on the pool-reserve connection"});
    add("raw-wave-2", AttackStage::SrvnetWave2, "Second burst of non-SMB connections",
        {"as raw-wave-1, after free-reserve-1"});
    add("wave-echo", AttackStage::WaveEcho, "Echo after the second burst (optional)",
        {"Echo request on the upload connection"});
    add("free-reserve-2", AttackStage::FreeReserve2, "Second reservation released",
        {"FIN or RST on the pool-reserve-2 connection"});
    add("trigger", AttackStage::Trigger, "Final list segment",
        {"Trans2 Secondary request completing the mismatched transaction on the upload connection",
         "arrives only after both reservations were released"});
    add("payload", AttackStage::Payload, "Data over groomed connections",
        {"client data on raw-wave connections after the trigger", "followed by FIN on those connections"});
    return d;
}

std::string RuleDocument::to_text() const {
    std::ostringstream out;
    out << "# SMB1 pool-grooming signatures\n";
    out << "# Stages are matched per (client host, server host) pair on TCP port 445.\n";
    for (const auto& r : rules) {
        out << "\nrule " << r.id << "\n";
        out << "  stage: " << stage_number(r.stage) << " " << detect::to_string(r.stage) << "\n";
        out << "  title: " << r.title << "\n";
        for (const auto& c : r.conditions) out << "  match: " << c << "\n";
    }
    return out.str();
}

std::string explain(AttackStage stage) {
    std::string body;
    switch (stage) {
    case AttackStage::Idle: body = "No activity of interest from this host pair."; break;
    case AttackStage::Probe:
        body = "Reconnaissance. A PeekNamedPipe Trans request on IPC$ answered with 0xC0000205 "
               "reveals the unpatched server; a Trans2 SESSION_SETUP ping answered with multiplex "
               "id 0x51 instead of 0x41 reveals an implant.";
        break;
    case AttackStage::ListUpload:
        body = "An NT Trans request starts a large extended-attribute list (SizeOfList 0x10000) and "
               "Trans2 Secondary requests continue it. The server accepts the mix, which is what lets "
               "the list be held open. Everything is sent except the final segment.";
        break;
    case AttackStage::ListEcho: body = "Echo on the upload connection while the list waits."; break;
    case AttackStage::Reserve1:
        body = "New connection; a 12-word Session Setup without extended security is padded to "
               "0x10000 bytes so the server reserves a matching non-paged pool buffer.";
        break;
    case AttackStage::SrvnetWave1:
        body = "A burst of connections sends non-SMB data. Each gets a 0x11000-byte connection buffer "
               "whose header holds a data-mapping pointer and a close handler.";
        break;
    case AttackStage::Reserve2: body = "Second reservation, sized like the future result buffer."; break;
    case AttackStage::FreeReserve1: body = "The first reservation's connection closes, freeing its buffer."; break;
    case AttackStage::SrvnetWave2:
        body = "A second burst of connection buffers fills the pool after the second reservation.";
        break;
    case AttackStage::WaveEcho: body = "Optional echo on the upload connection."; break;
    case AttackStage::FreeReserve2:
        body = "The second reservation closes. Its hole is now the most recently freed chunk, so the "
               "next buffer of that size lands there, right before a connection buffer.";
        break;
    case AttackStage::Trigger:
        body = "A single Trans2 Secondary delivers the last segment of the original list. The list is "
               "converted into the reused hole; the truncated size bound lets conversion run past it "
               "and overwrite the next connection buffer's header.";
        break;
    case AttackStage::Payload:
        body = "Data is pushed over the groomed connections, then they are closed so the forged "
               "handler runs.";
        break;
    case AttackStage::Complete: body = "All payload connections closed."; break;
    }
    return "stage-" + std::to_string(stage_number(stage)) + " " + to_string(stage) + "\n  " + body + "\n";
}

std::string explain_all() {
    std::string out;
    for (int i = 1; i <= kStageCount; ++i) out += explain(static_cast<AttackStage>(i));
    return out;
}

}  // namespace etlab::detect
