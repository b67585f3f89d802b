// Grooming scripts: a line-oriented replay of the connection timeline against
// the pool model.
//
//   RESERVE reserve1|reserve2|other <size>   allocate on the next connection
//   SRVNET <n>                               open n Srvnet connections
//   FREE <conn>                              close that connection's buffer
//   CONVERT bug=on|off                       upload the crafted list, convert it
//   DELIVER <conn>|all                       send data, then disconnect
//
// Connections are numbered from 2 in allocation order; connection 1 is the
// list-upload connection whose result buffer CONVERT allocates.

#ifndef ETLAB_GROOMING_HPP
#define ETLAB_GROOMING_HPP

#include "etlab/fea.hpp"
#include "etlab/pool.hpp"

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace etlab::pool {

using ConnectionNumber = int;
inline constexpr ConnectionNumber kUploadConnection = 1;
inline constexpr ConnectionNumber kAllConnections = 0;

struct GroomStep {
    enum class Kind { Reserve, Free, Srvnet, Convert, Deliver };
    Kind kind = Kind::Reserve;
    AllocationKind reserve_kind = AllocationKind::Other;
    std::size_t size = 0;                     // Reserve
    std::size_t count = 0;                    // Srvnet
    ConnectionNumber connection = 0;          // Free, Deliver (kAllConnections = every Srvnet one)
    bool bug_enabled = true;                  // Convert
    int line = 0;                             // 1-based source line, 0 when built in code

    bool operator==(const GroomStep&) const = default;
};

using GroomScript = std::vector<GroomStep>;

class ScriptError : public std::runtime_error {
public:
    ScriptError(int line, const std::string& what);
    int line() const { return line_; }

private:
    int line_;
};

GroomScript parse_groom_script(std::string_view text);
std::string format_step(const GroomStep& step);
std::string format_groom_script(const GroomScript& script);

/// The connection timeline: reserve, first wave, reserve, free, second wave,
/// free, convert, deliver on every Srvnet connection.
GroomScript canonical_script(bool bug_enabled = true, std::size_t first_wave = 13,
                             std::size_t second_wave = 6);

struct GroomOptions {
    PoolConfig pool;
    VirtualAddress target_address = 0x7A7A0000;  // both forged pointers get this value
    Bytes payload;                               // contents of the payload record
    fea::CraftTargets craft;
};

enum class Adjacency { Adjacent, NotAdjacent };

struct StepSnapshot {
    GroomStep step;
    PoolState state;
    std::string note;
};

struct GroomingResult {
    PoolState state;
    std::map<ConnectionNumber, AllocationId> connections;  // live and freed, by connection number
    std::optional<AllocationId> result_buffer;
    Adjacency adjacency = Adjacency::NotAdjacent;
    std::optional<ConnectionNumber> adjacent_connection;
    std::optional<fea::ConversionOutcome> conversion;
    std::vector<std::pair<ConnectionNumber, DeliveryOutcome>> deliveries;
    std::vector<StepSnapshot> trace;

    /// PayloadWouldExecute if any delivery executed, else BenignDisconnect.
    DeliveryOutcome verdict() const;
};

/// Throws ScriptError (carrying the step's line) on steps that reference
/// unknown or already freed connections, or a second CONVERT.
GroomingResult run_grooming_script(const GroomScript& script, const GroomOptions& options = {});

/// Box-style dump of live allocations and free chunks in address order.
std::string render_state(const PoolState& state,
                         const std::map<ConnectionNumber, AllocationId>& connections);

}  // namespace etlab::pool

#endif
