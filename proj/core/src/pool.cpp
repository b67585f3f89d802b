#include "etlab/pool.hpp"

#include <algorithm>

namespace etlab::pool {

std::string to_string(AllocationKind k) {
    switch (k) {
    case AllocationKind::SrvReserve1: return "SrvReserve1";
    case AllocationKind::SrvReserve2: return "SrvReserve2";
    case AllocationKind::SrvnetConnection: return "SrvnetConnection";
    case AllocationKind::ResultListBuffer: return "ResultListBuffer";
    case AllocationKind::Other: return "Other";
    }
    return "?";
}

std::string to_string(DeliveryOutcome o) {
    return o == DeliveryOutcome::PayloadWouldExecute ? "PayloadWouldExecute" : "BenignDisconnect";
}

const Allocation* PoolState::find(AllocationId id) const {
    for (const auto& [addr, a] : allocations_)
        if (a.id == id) return &a;
    return nullptr;
}

const Allocation* PoolState::at_address(VirtualAddress address) const {
    auto it = allocations_.find(address);
    return it == allocations_.end() ? nullptr : &it->second;
}

const Allocation* PoolState::following(const Allocation& a) const { return at_address(a.end()); }

std::pair<PoolState, Allocation> allocate(const PoolState& state, AllocationKind kind,
                                          std::size_t size) {
    if (size == 0) throw PoolError(PoolError::Kind::InvalidSize, "allocation size must be positive");
    PoolState next = state;
    const auto& cfg = next.config_;
    const std::size_t rounded = align_up(size, cfg.granularity);

    Allocation a;
    a.id = AllocationId{next.next_id_++};
    a.kind = kind;
    a.requested = size;
    if (!next.free_chunks_.empty() && next.free_chunks_.back().size >= rounded) {
        const FreeChunk top = next.free_chunks_.back();
        next.free_chunks_.pop_back();
        a.address = top.address;
        a.size = top.size;
    } else {
        a.address = next.next_fresh_address_;
        a.size = rounded;
        next.next_fresh_address_ += rounded;
    }
    if (kind == AllocationKind::SrvnetConnection)
        a.header = SrvnetHeaderImage{a.address + cfg.srvnet_mdl_offset, cfg.srvnet_handler};
    next.allocations_.emplace(a.address, a);
    return {std::move(next), a};
}

PoolState free(const PoolState& state, AllocationId id) {
    const Allocation* a = state.find(id);
    if (!a)
        throw PoolError(PoolError::Kind::UnknownAllocation,
                        "no live allocation with id " + std::to_string(id.value));
    PoolState next = state;
    next.free_chunks_.push_back(FreeChunk{a->address, a->size});
    next.allocations_.erase(a->address);
    return next;
}

PoolState apply_overflow(const PoolState& state, AllocationId source, ByteView overflow) {
    const Allocation* src = state.find(source);
    if (!src)
        throw PoolError(PoolError::Kind::UnknownAllocation,
                        "no live allocation with id " + std::to_string(source.value));
    if (overflow.empty()) return state;

    const std::size_t slack = src->size - std::min(src->requested, src->size);
    if (overflow.size() <= slack) return state;  // stays inside the source's own chunk

    const Allocation* victim = state.following(*src);
    if (!victim)
        throw PoolError(PoolError::Kind::NoAdjacentAllocation,
                        "nothing allocated directly after " + hex(src->address));

    PoolState next = state;
    Allocation& v = next.allocations_.at(victim->address);
    v.header_overwritten = true;
    if (v.header) {
        if (auto image = SrvnetHeaderImage::decode(overflow.subspan(slack))) *v.header = *image;
    }
    return next;
}

DeliveryOutcome deliver_and_disconnect(const PoolState& state, AllocationId connection) {
    const Allocation* a = state.find(connection);
    if (!a || a->kind != AllocationKind::SrvnetConnection)
        throw PoolError(PoolError::Kind::UnknownAllocation,
                        "no live Srvnet connection with id " + std::to_string(connection.value));
    // Incoming data is mapped at p_mdl; closing calls the handler. Only when
    // both point at the same place does the delivered data run.
    return a->header && a->header->hijacked() ? DeliveryOutcome::PayloadWouldExecute
                                              : DeliveryOutcome::BenignDisconnect;
}

bool allocations_disjoint(const PoolState& state) {
    VirtualAddress prev_end = 0;
    bool first = true;
    for (const auto& [addr, a] : state.allocations()) {
        if (!first && addr < prev_end) return false;
        prev_end = a.end();
        first = false;
    }
    return true;
}

}  // namespace etlab::pool
