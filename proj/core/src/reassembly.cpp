#include "etlab/reassembly.hpp"

namespace etlab::capture {

std::optional<std::uint64_t> StreamReassembler::offset_of(std::uint32_t seq) const {
    if (!base_) return std::nullopt;
    return static_cast<std::uint32_t>(seq - *base_);
}

std::vector<StreamChunk> StreamReassembler::add(std::uint32_t seq, ByteView payload, Timestamp ts) {
    std::vector<StreamChunk> out;
    if (payload.empty()) return out;
    if (!base_) base_ = seq;

    std::uint64_t offset = *offset_of(seq);
    if (offset >= 0x80000000u) {
        // Starts before the stream origin; keep only the part after it.
        const std::uint64_t behind = 0x100000000ull - offset;
        if (behind >= payload.size()) return out;
        payload = payload.subspan(behind);
        offset = 0;
    }
    if (offset + payload.size() <= next_) return out;  // already delivered
    if (offset < next_) {
        payload = payload.subspan(next_ - offset);
        offset = next_;
    }
    pending_.emplace(offset, Pending{Bytes(payload.begin(), payload.end()), ts});
    drain(out);
    return out;
}

void StreamReassembler::drain(std::vector<StreamChunk>& out) {
    while (!pending_.empty() && pending_.begin()->first <= next_) {
        auto node = pending_.extract(pending_.begin());
        const std::uint64_t offset = node.key();
        Pending& p = node.mapped();
        const std::uint64_t end = offset + p.data.size();
        if (end <= next_) continue;
        const auto skip = static_cast<std::ptrdiff_t>(next_ - offset);
        StreamChunk c;
        c.offset = next_;
        c.data.assign(p.data.begin() + skip, p.data.end());
        c.timestamp = p.timestamp;
        next_ = end;
        out.push_back(std::move(c));
    }
}

std::vector<StreamChunk> StreamReassembler::flush() {
    std::vector<StreamChunk> out;
    while (!pending_.empty()) {
        const std::uint64_t first = pending_.begin()->first;
        if (first > next_) {
            gaps_.push_back({next_, first - next_});
            next_ = first;
        }
        drain(out);
    }
    return out;
}

}  // namespace etlab::capture
