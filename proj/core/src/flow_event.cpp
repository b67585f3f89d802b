#include "etlab/flow_event.hpp"

#include <charconv>
#include <sstream>

namespace etlab {

std::string format_ipv4(Ipv4 a) {
    return std::to_string(a >> 24) + "." + std::to_string((a >> 16) & 0xFF) + "." +
           std::to_string((a >> 8) & 0xFF) + "." + std::to_string(a & 0xFF);
}

std::optional<Ipv4> parse_ipv4(std::string_view text) {
    Ipv4 out = 0;
    const char* p = text.data();
    const char* end = text.data() + text.size();
    for (int i = 0; i < 4; ++i) {
        unsigned octet = 0;
        auto [next, ec] = std::from_chars(p, end, octet);
        if (ec != std::errc{} || next == p || octet > 255) return std::nullopt;
        out = (out << 8) | octet;
        p = next;
        if (i < 3) {
            if (p == end || *p != '.') return std::nullopt;
            ++p;
        }
    }
    if (p != end) return std::nullopt;
    return out;
}

std::string to_string(const Endpoint& e) { return format_ipv4(e.ip) + ":" + std::to_string(e.port); }

std::string describe(const FlowEvent& e) {
    std::ostringstream out;
    out << (static_cast<double>(e.timestamp.count()) / 1e6) << " " << to_string(e.source()) << " -> "
        << to_string(e.destination()) << " ";
    std::visit(
        [&](const auto& k) {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, smb::SmbMessage>) {
                out << "SMB " << smb::command_name(k.header.command)
                    << (k.header.is_reply() ? " response" : " request") << " mid=" << k.header.multiplex_id
                    << " status=" << hex(k.header.nt_status, 8);
            } else if constexpr (std::is_same_v<T, RawTcpOpen>) {
                out << "open";
            } else if constexpr (std::is_same_v<T, RawTcpData>) {
                out << "raw " << k.bytes << " bytes";
            } else {
                out << "fin";
            }
        },
        e.kind);
    return out.str();
}

}  // namespace etlab
