#ifndef ETLAB_SRVNET_HPP
#define ETLAB_SRVNET_HPP

#include "etlab/bytes.hpp"

#include <cstdint>
#include <optional>

namespace etlab {

using VirtualAddress = std::uint64_t;

/// The two connection-header fields that matter to the model: where incoming
/// data gets mapped, and what runs when the connection closes. The real
/// header reaches the handler through one more pointer; here it is a field.
struct SrvnetHeaderImage {
    VirtualAddress p_mdl = 0;
    VirtualAddress p_handler_function = 0;

    static constexpr std::size_t kImageSize = 24;

    bool hijacked() const { return p_mdl == p_handler_function; }

    /// 8-byte tag followed by both fields little-endian.
    Bytes serialize() const;
    /// Decodes an image at the start of `bytes`; nullopt when the tag is missing.
    static std::optional<SrvnetHeaderImage> decode(ByteView bytes);

    bool operator==(const SrvnetHeaderImage&) const = default;
};

}  // namespace etlab

#endif
