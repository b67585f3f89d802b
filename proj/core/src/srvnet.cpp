#include "etlab/srvnet.hpp"

#include <algorithm>
#include <string_view>

namespace etlab {

namespace {
constexpr std::string_view kTag = "SRVNHDR1";
}

Bytes SrvnetHeaderImage::serialize() const {
    ByteWriter w;
    w.text(kTag);
    w.u64le(p_mdl);
    w.u64le(p_handler_function);
    return w.take();
}

std::optional<SrvnetHeaderImage> SrvnetHeaderImage::decode(ByteView bytes) {
    if (bytes.size() < kImageSize) return std::nullopt;
    if (!std::equal(kTag.begin(), kTag.end(), bytes.begin())) return std::nullopt;
    SrvnetHeaderImage img;
    img.p_mdl = load_u64le(bytes.data() + 8);
    img.p_handler_function = load_u64le(bytes.data() + 16);
    return img;
}

}  // namespace etlab
