#include "etlab/grooming.hpp"

#include <algorithm>
#include <cctype>
#include <iomanip>
#include <sstream>

namespace etlab::pool {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::size_t parse_number(const std::string& token, int line, const char* what) {
    try {
        std::size_t pos = 0;
        const auto v = std::stoull(token, &pos, 0);
        if (pos != token.size()) throw std::invalid_argument(token);
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw ScriptError(line, std::string("expected ") + what + ", got '" + token + "'");
    }
}

const char* reserve_token(AllocationKind k) {
    switch (k) {
    case AllocationKind::SrvReserve1: return "reserve1";
    case AllocationKind::SrvReserve2: return "reserve2";
    default: return "other";
    }
}

std::string label(AllocationKind k) {
    switch (k) {
    case AllocationKind::SrvReserve1: return "1st reserve";
    case AllocationKind::SrvReserve2: return "2nd reserve";
    case AllocationKind::SrvnetConnection: return "Srvnet";
    case AllocationKind::ResultListBuffer: return "result list";
    case AllocationKind::Other: return "other";
    }
    return "?";
}

}  // namespace

ScriptError::ScriptError(int line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

GroomScript parse_groom_script(std::string_view text) {
    GroomScript script;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        std::istringstream words(raw);
        std::vector<std::string> tok;
        for (std::string w; words >> w;) tok.push_back(w);
        if (tok.empty()) continue;

        GroomStep step;
        step.line = line;
        const auto op = lower(tok[0]);
        auto arity = [&](std::size_t n) {
            if (tok.size() != n + 1)
                throw ScriptError(line, tok[0] + " takes " + std::to_string(n) + " argument(s)");
        };
        if (op == "reserve") {
            arity(2);
            step.kind = GroomStep::Kind::Reserve;
            const auto kind = lower(tok[1]);
            if (kind == "reserve1") step.reserve_kind = AllocationKind::SrvReserve1;
            else if (kind == "reserve2") step.reserve_kind = AllocationKind::SrvReserve2;
            else if (kind == "other") step.reserve_kind = AllocationKind::Other;
            else throw ScriptError(line, "unknown reserve kind '" + tok[1] + "'");
            step.size = parse_number(tok[2], line, "a size");
            if (step.size == 0) throw ScriptError(line, "reserve size must be positive");
        } else if (op == "free") {
            arity(1);
            step.kind = GroomStep::Kind::Free;
            step.connection = static_cast<ConnectionNumber>(parse_number(tok[1], line, "a connection number"));
        } else if (op == "srvnet") {
            arity(1);
            step.kind = GroomStep::Kind::Srvnet;
            step.count = parse_number(tok[1], line, "a connection count");
        } else if (op == "convert") {
            arity(1);
            step.kind = GroomStep::Kind::Convert;
            const auto flag = lower(tok[1]);
            if (flag == "bug=on") step.bug_enabled = true;
            else if (flag == "bug=off") step.bug_enabled = false;
            else throw ScriptError(line, "expected bug=on or bug=off, got '" + tok[1] + "'");
        } else if (op == "deliver") {
            arity(1);
            step.kind = GroomStep::Kind::Deliver;
            step.connection = lower(tok[1]) == "all"
                                  ? kAllConnections
                                  : static_cast<ConnectionNumber>(parse_number(tok[1], line, "a connection number"));
        } else {
            throw ScriptError(line, "unknown step '" + tok[0] + "'");
        }
        script.push_back(step);
    }
    return script;
}

std::string format_step(const GroomStep& s) {
    switch (s.kind) {
    case GroomStep::Kind::Reserve: return std::string("RESERVE ") + reserve_token(s.reserve_kind) + " " + hex(s.size);
    case GroomStep::Kind::Free: return "FREE " + std::to_string(s.connection);
    case GroomStep::Kind::Srvnet: return "SRVNET " + std::to_string(s.count);
    case GroomStep::Kind::Convert: return std::string("CONVERT bug=") + (s.bug_enabled ? "on" : "off");
    case GroomStep::Kind::Deliver:
        return "DELIVER " + (s.connection == kAllConnections ? std::string("all") : std::to_string(s.connection));
    }
    return "?";
}

std::string format_groom_script(const GroomScript& script) {
    std::string out;
    for (const auto& s : script) out += format_step(s) + "\n";
    return out;
}

GroomScript canonical_script(bool bug_enabled, std::size_t first_wave, std::size_t second_wave) {
    const ConnectionNumber reserve1 = 2;
    const auto reserve2 = static_cast<ConnectionNumber>(3 + first_wave);
    GroomScript s;
    auto add = [&](GroomStep step) { s.push_back(step); };
    add({.kind = GroomStep::Kind::Reserve, .reserve_kind = AllocationKind::SrvReserve1, .size = 0x10000});
    add({.kind = GroomStep::Kind::Srvnet, .count = first_wave});
    add({.kind = GroomStep::Kind::Reserve, .reserve_kind = AllocationKind::SrvReserve2, .size = 0x11000});
    add({.kind = GroomStep::Kind::Free, .connection = reserve1});
    add({.kind = GroomStep::Kind::Srvnet, .count = second_wave});
    add({.kind = GroomStep::Kind::Free, .connection = reserve2});
    add({.kind = GroomStep::Kind::Convert, .bug_enabled = bug_enabled});
    add({.kind = GroomStep::Kind::Deliver, .connection = kAllConnections});
    return s;
}

DeliveryOutcome GroomingResult::verdict() const {
    for (const auto& [conn, outcome] : deliveries)
        if (outcome == DeliveryOutcome::PayloadWouldExecute) return outcome;
    return DeliveryOutcome::BenignDisconnect;
}

GroomingResult run_grooming_script(const GroomScript& script, const GroomOptions& options) {
    GroomingResult r;
    r.state = PoolState(options.pool);
    ConnectionNumber next_conn = 2;

    auto live_connection = [&](const GroomStep& step, ConnectionNumber conn) -> AllocationId {
        auto it = r.connections.find(conn);
        if (it == r.connections.end() || !r.state.find(it->second))
            throw ScriptError(step.line, "connection " + std::to_string(conn) + " has no live buffer");
        return it->second;
    };

    for (const auto& step : script) {
        std::string note;
        switch (step.kind) {
        case GroomStep::Kind::Reserve: {
            auto [next, a] = allocate(r.state, step.reserve_kind, step.size);
            r.state = std::move(next);
            r.connections[next_conn] = a.id;
            note = "connection " + std::to_string(next_conn++) + " reserves " + hex(a.size) + " at " + hex(a.address);
            break;
        }
        case GroomStep::Kind::Srvnet: {
            const auto first = next_conn;
            for (std::size_t i = 0; i < step.count; ++i) {
                auto [next, a] = allocate(r.state, AllocationKind::SrvnetConnection, r.state.config().srvnet_size);
                r.state = std::move(next);
                r.connections[next_conn++] = a.id;
            }
            note = "connections " + std::to_string(first) + "-" + std::to_string(next_conn - 1) + " open Srvnet buffers";
            break;
        }
        case GroomStep::Kind::Free: {
            const auto id = live_connection(step, step.connection);
            r.state = free(r.state, id);
            note = "connection " + std::to_string(step.connection) + " closed; buffer pushed on the free stack";
            break;
        }
        case GroomStep::Kind::Convert: {
            if (r.result_buffer) throw ScriptError(step.line, "list already converted");
            const SrvnetHeaderImage forged{options.target_address, options.target_address};
            const auto list = fea::craft_malicious_list(options.payload, forged, options.craft);
            auto outcome = fea::convert_list(list, {.bug_enabled = step.bug_enabled});

            auto [next, buffer] = allocate(r.state, AllocationKind::ResultListBuffer, outcome.s1);
            r.state = std::move(next);
            r.connections[kUploadConnection] = buffer.id;
            r.result_buffer = buffer.id;

            const Allocation* after = r.state.following(buffer);
            if (after && after->kind == AllocationKind::SrvnetConnection) {
                r.adjacency = Adjacency::Adjacent;
                for (const auto& [conn, id] : r.connections)
                    if (id == after->id) r.adjacent_connection = conn;
            }
            note = "result list of " + hex(outcome.s1) + " bytes placed at " + hex(buffer.address) + "; " +
                   std::to_string(outcome.records_converted) + " records converted";
            if (outcome.overflowed()) {
                try {
                    r.state = apply_overflow(r.state, buffer.id, outcome.overflow_bytes);
                    note += "; " + std::to_string(outcome.overflow_bytes.size()) + " bytes overflowed into " +
                            (after ? hex(after->address) : std::string("?"));
                } catch (const PoolError& e) {
                    if (e.kind() != PoolError::Kind::NoAdjacentAllocation) throw;
                    note += "; overflow ran into unallocated pool";
                }
            }
            r.conversion = std::move(outcome);
            break;
        }
        case GroomStep::Kind::Deliver: {
            std::vector<ConnectionNumber> targets;
            if (step.connection == kAllConnections) {
                for (const auto& [conn, id] : r.connections) {
                    const Allocation* a = r.state.find(id);
                    if (a && a->kind == AllocationKind::SrvnetConnection) targets.push_back(conn);
                }
            } else {
                targets.push_back(step.connection);
            }
            std::size_t executed = 0;
            for (auto conn : targets) {
                const auto id = live_connection(step, conn);
                if (r.state.find(id)->kind != AllocationKind::SrvnetConnection)
                    throw ScriptError(step.line, "connection " + std::to_string(conn) + " is not a Srvnet connection");
                const auto outcome = deliver_and_disconnect(r.state, id);
                if (outcome == DeliveryOutcome::PayloadWouldExecute) ++executed;
                r.deliveries.emplace_back(conn, outcome);
                r.state = free(r.state, id);
            }
            note = std::to_string(targets.size()) + " connection(s) delivered and closed, " +
                   std::to_string(executed) + " would execute the payload";
            break;
        }
        }
        r.trace.push_back({step, r.state, std::move(note)});
    }
    return r;
}

std::string render_state(const PoolState& state, const std::map<ConnectionNumber, AllocationId>& connections) {
    struct Row {
        VirtualAddress address;
        std::size_t size;
        std::string conn, what, header;
    };
    std::vector<Row> rows;
    for (const auto& [addr, a] : state.allocations()) {
        Row row{addr, a.size, "", label(a.kind), ""};
        for (const auto& [conn, id] : connections)
            if (id == a.id) row.conn = std::to_string(conn);
        if (a.header) {
            row.header = "mdl=" + hex(a.header->p_mdl) + " handler=" + hex(a.header->p_handler_function);
            if (a.header->hijacked()) row.header += " HIJACKED";
        } else if (a.header_overwritten) {
            row.header = "overwritten";
        }
        rows.push_back(std::move(row));
    }
    for (std::size_t i = 0; i < state.free_chunks().size(); ++i) {
        const auto& c = state.free_chunks()[i];
        rows.push_back({c.address, c.size, "", "free (stack depth " +
                        std::to_string(state.free_chunks().size() - 1 - i) + ")", ""});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.address < b.address; });

    std::ostringstream out;
    const std::string rule = "+------------+---------+------+-----------------------+";
    out << rule << "\n| address    | size    | conn | contents              |\n" << rule << "\n";
    for (const auto& row : rows) {
        out << "| " << std::left << std::setw(10) << hex(row.address) << " | " << std::setw(7) << hex(row.size)
            << " | " << std::right << std::setw(4) << row.conn << " | " << std::left << std::setw(21) << row.what
            << " |";
        if (!row.header.empty()) out << " " << row.header;
        out << "\n";
    }
    out << rule << "\n";
    return out.str();
}

}  // namespace etlab::pool
