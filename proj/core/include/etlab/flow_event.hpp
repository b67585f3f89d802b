#ifndef ETLAB_FLOW_EVENT_HPP
#define ETLAB_FLOW_EVENT_HPP

#include "etlab/smb.hpp"

#include <chrono>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace etlab {

using Ipv4 = std::uint32_t;  // host byte order
using Timestamp = std::chrono::microseconds;

std::string format_ipv4(Ipv4 addr);
std::optional<Ipv4> parse_ipv4(std::string_view text);
constexpr Ipv4 make_ipv4(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d) {
    return (Ipv4{a} << 24) | (Ipv4{b} << 16) | (Ipv4{c} << 8) | d;
}

inline constexpr std::uint16_t kSmbPort = 445;

struct Endpoint {
    Ipv4 ip = 0;
    std::uint16_t port = 0;
    auto operator<=>(const Endpoint&) const = default;
};

std::string to_string(const Endpoint& e);

/// A TCP connection, named by who opened it.
struct FlowKey {
    Endpoint client;
    Endpoint server;
    auto operator<=>(const FlowKey&) const = default;
};

enum class Direction : std::uint8_t { ClientToServer, ServerToClient };

struct RawTcpOpen {
    bool operator==(const RawTcpOpen&) const = default;
};
struct RawTcpData {
    std::size_t bytes = 0;
    bool operator==(const RawTcpData&) const = default;
};
struct TcpFin {
    bool operator==(const TcpFin&) const = default;
};

using FlowEventKind = std::variant<smb::SmbMessage, RawTcpOpen, RawTcpData, TcpFin>;

struct FlowEvent {
    Timestamp timestamp{0};
    FlowKey flow;
    Direction direction = Direction::ClientToServer;
    FlowEventKind kind;

    const Endpoint& source() const {
        return direction == Direction::ClientToServer ? flow.client : flow.server;
    }
    const Endpoint& destination() const {
        return direction == Direction::ClientToServer ? flow.server : flow.client;
    }
    const smb::SmbMessage* smb() const { return std::get_if<smb::SmbMessage>(&kind); }

    bool operator==(const FlowEvent&) const = default;
};

/// One-line rendering, for logs and test diagnostics.
std::string describe(const FlowEvent& e);

}  // namespace etlab

#endif
