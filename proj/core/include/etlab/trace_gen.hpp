// Synthetic captures: a plain file-sharing session, and the full connection
// choreography of the pool-grooming attack with every payload replaced by the
// inert filler pattern.

#ifndef ETLAB_TRACE_GEN_HPP
#define ETLAB_TRACE_GEN_HPP

#include "etlab/capture.hpp"

#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace etlab::capture {

inline constexpr int kAttackSteps = 12;

struct Scenario {
    enum class Kind { Benign, FullAttack, TruncatedAttack };
    Kind kind = Kind::Benign;
    int last_step = kAttackSteps;  // TruncatedAttack: final step emitted, 1..12

    static Scenario benign() { return {Kind::Benign, 0}; }
    static Scenario full_attack() { return {Kind::FullAttack, kAttackSteps}; }
    /// Throws std::invalid_argument outside 1..12.
    static Scenario truncated(int last_step);

    /// "benign", "full-attack" or "truncated:N". Throws std::invalid_argument.
    static Scenario parse(std::string_view text);

    bool operator==(const Scenario&) const = default;
};

std::string to_string(const Scenario& s);

struct TraceOptions {
    Ipv4 attacker = make_ipv4(10, 10, 10, 151);
    Ipv4 victim = make_ipv4(10, 10, 10, 152);
    Timestamp spacing = std::chrono::milliseconds(10);
    std::size_t mss = 1460;
    std::size_t first_wave = 13;
    std::size_t second_wave = 6;
    std::size_t upload_chunk = 4096;  // data bytes per Trans2 Secondary
    std::size_t burst_bytes = 0x1000; // per connection in the final step
};

/// Deterministic for a given (scenario, seed, options).
CaptureFile generate_trace(const Scenario& scenario, std::uint64_t seed,
                           const TraceOptions& options = {});

}  // namespace etlab::capture

#endif
