// In-order delivery of one direction of a TCP byte stream.

#ifndef ETLAB_REASSEMBLY_HPP
#define ETLAB_REASSEMBLY_HPP

#include "etlab/bytes.hpp"
#include "etlab/flow_event.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

namespace etlab::capture {

struct StreamChunk {
    std::uint64_t offset = 0;  // stream offset of data[0]
    Bytes data;
    Timestamp timestamp{0};
    bool operator==(const StreamChunk&) const = default;
};

struct StreamGap {
    std::uint64_t offset = 0;
    std::uint64_t length = 0;
    bool operator==(const StreamGap&) const = default;
};

/// Holds out-of-order segments until the bytes before them arrive. Each
/// delivered chunk keeps the boundaries and timestamp of the segment it came
/// from; retransmitted or overlapping bytes are delivered once.
class StreamReassembler {
public:
    /// `first_seq` is the sequence number of the first data byte (ISN + 1).
    void start(std::uint32_t first_seq) { base_ = first_seq; }
    bool started() const { return base_.has_value(); }

    std::vector<StreamChunk> add(std::uint32_t seq, ByteView payload, Timestamp ts);
    /// Delivers whatever is still pending, skipping holes and recording them.
    std::vector<StreamChunk> flush();

    std::uint64_t delivered() const { return next_; }
    /// Stream offset corresponding to `seq`, or nullopt before start().
    std::optional<std::uint64_t> offset_of(std::uint32_t seq) const;
    const std::vector<StreamGap>& gaps() const { return gaps_; }
    std::size_t pending_segments() const { return pending_.size(); }

private:
    struct Pending {
        Bytes data;
        Timestamp timestamp;
    };
    void drain(std::vector<StreamChunk>& out);

    std::optional<std::uint32_t> base_;
    std::uint64_t next_ = 0;
    std::multimap<std::uint64_t, Pending> pending_;
    std::vector<StreamGap> gaps_;
};

/// Both directions of one connection.
struct TcpFlowAssembly {
    FlowKey key;
    StreamReassembler client_to_server;
    StreamReassembler server_to_client;

    StreamReassembler& stream(Direction d) {
        return d == Direction::ClientToServer ? client_to_server : server_to_client;
    }
};

}  // namespace etlab::capture

#endif
