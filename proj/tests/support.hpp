// Small generators shared by the property tests.

#ifndef ETLAB_TESTS_SUPPORT_HPP
#define ETLAB_TESTS_SUPPORT_HPP

#include "etlab/bytes.hpp"

#include <cstdint>
#include <algorithm>
#include <random>

namespace etlab::testing {

class Gen {
public:
    explicit Gen(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t u64() { return engine_(); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(engine_()); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(engine_()); }
    std::uint8_t u8() { return static_cast<std::uint8_t>(engine_()); }
    /// Uniform in [lo, hi].
    std::size_t range(std::size_t lo, std::size_t hi) { return lo + engine_() % (hi - lo + 1); }
    bool chance(unsigned percent) { return engine_() % 100 < percent; }

    Bytes bytes(std::size_t n) {
        Bytes b(n);
        for (auto& x : b) x = u8();
        return b;
    }

    template <typename C>
    void shuffle(C& c) {
        std::shuffle(c.begin(), c.end(), engine_);
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace etlab::testing

#endif
