// Deterministic non-paged pool model: bump allocation, a LIFO stack of freed
// chunks, and adjacency queries. States are values; every operation returns a
// new state and leaves its input untouched.

#ifndef ETLAB_POOL_HPP
#define ETLAB_POOL_HPP

#include "etlab/bytes.hpp"
#include "etlab/srvnet.hpp"

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace etlab::pool {

enum class AllocationKind { SrvReserve1, SrvReserve2, SrvnetConnection, ResultListBuffer, Other };

std::string to_string(AllocationKind k);

struct AllocationId {
    std::uint32_t value = 0;
    auto operator<=>(const AllocationId&) const = default;
};

struct Allocation {
    AllocationId id;
    AllocationKind kind = AllocationKind::Other;
    VirtualAddress address = 0;
    std::size_t size = 0;       // bytes occupied (granularity-rounded, or the reused chunk)
    std::size_t requested = 0;  // bytes asked for
    std::optional<SrvnetHeaderImage> header;  // SrvnetConnection only
    bool header_overwritten = false;

    VirtualAddress end() const { return address + size; }
    bool operator==(const Allocation&) const = default;
};

struct FreeChunk {
    VirtualAddress address = 0;
    std::size_t size = 0;
    bool operator==(const FreeChunk&) const = default;
};

struct PoolConfig {
    VirtualAddress base = 0x10000000;
    std::size_t granularity = 0x1000;
    std::size_t srvnet_size = 0x11000;
    VirtualAddress srvnet_handler = 0x5E4E0000;  // stands in for the receive handler
    std::size_t srvnet_mdl_offset = 0x200;       // default mapping target inside the buffer
    bool operator==(const PoolConfig&) const = default;
};

class PoolError : public std::runtime_error {
public:
    enum class Kind { UnknownAllocation, NoAdjacentAllocation, InvalidSize };
    PoolError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

class PoolState {
public:
    explicit PoolState(PoolConfig config = {})
        : config_(config), next_fresh_address_(config.base) {}

    const PoolConfig& config() const { return config_; }
    const std::map<VirtualAddress, Allocation>& allocations() const { return allocations_; }
    /// Back of the vector is the top of the stack.
    const std::vector<FreeChunk>& free_chunks() const { return free_chunks_; }
    VirtualAddress next_fresh_address() const { return next_fresh_address_; }

    const Allocation* find(AllocationId id) const;
    const Allocation* at_address(VirtualAddress address) const;
    /// The live allocation starting exactly where `a` ends.
    const Allocation* following(const Allocation& a) const;

    bool operator==(const PoolState&) const = default;

private:
    friend std::pair<PoolState, Allocation> allocate(const PoolState&, AllocationKind, std::size_t);
    friend PoolState free(const PoolState&, AllocationId);
    friend PoolState apply_overflow(const PoolState&, AllocationId, ByteView);

    PoolConfig config_;
    std::map<VirtualAddress, Allocation> allocations_;
    std::vector<FreeChunk> free_chunks_;
    VirtualAddress next_fresh_address_;
    std::uint32_t next_id_ = 1;
};

/// Reuses the top free chunk when it is large enough, otherwise bumps.
std::pair<PoolState, Allocation> allocate(const PoolState& state, AllocationKind kind,
                                          std::size_t size);

PoolState free(const PoolState& state, AllocationId id);

/// Writes conversion overflow past the end of `source`. The bytes begin at
/// source.address + source.requested; whatever lands beyond source.end() is
/// read as a Srvnet header image by the allocation that follows. An image
/// that does not decode leaves the neighbour flagged as overwritten but with
/// its pointers intact.
PoolState apply_overflow(const PoolState& state, AllocationId source, ByteView overflow_bytes);

enum class DeliveryOutcome { PayloadWouldExecute, BenignDisconnect };

std::string to_string(DeliveryOutcome o);

DeliveryOutcome deliver_and_disconnect(const PoolState& state, AllocationId connection);

/// True when no two live allocations share a byte.
bool allocations_disjoint(const PoolState& state);

}  // namespace etlab::pool

#endif
