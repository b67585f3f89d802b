#include "etlab/grooming.hpp"
#include "etlab/pool.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

using namespace etlab;
using namespace etlab::pool;
using etlab::testing::Gen;

namespace {

// Pairwise check, deliberately independent of the address-ordered map.
bool no_two_overlap(const PoolState& s) {
    std::vector<const Allocation*> all;
    for (const auto& [addr, a] : s.allocations()) all.push_back(&a);
    for (std::size_t i = 0; i < all.size(); ++i)
        for (std::size_t j = i + 1; j < all.size(); ++j)
            if (all[i]->address < all[j]->end() && all[j]->address < all[i]->end()) return false;
    return true;
}

// Free chunks must not overlap live allocations either.
bool free_chunks_unused(const PoolState& s) {
    for (const auto& c : s.free_chunks())
        for (const auto& [addr, a] : s.allocations())
            if (c.address < a.end() && a.address < c.address + c.size) return false;
    return true;
}

}  // namespace

TEST(PoolSim, BumpAllocationRoundsToGranularity) {
    PoolState s;
    auto [s1, a] = allocate(s, AllocationKind::Other, 0x10);
    auto [s2, b] = allocate(s1, AllocationKind::Other, 0x1001);
    EXPECT_EQ(a.address, 0x10000000u);
    EXPECT_EQ(a.size, 0x1000u);
    EXPECT_EQ(b.address, 0x10001000u);
    EXPECT_EQ(b.size, 0x2000u);
    EXPECT_EQ(s2.next_fresh_address(), 0x10003000u);
    EXPECT_TRUE(s.allocations().empty());  // inputs are untouched
    EXPECT_THROW(allocate(s, AllocationKind::Other, 0), PoolError);
}

TEST(PoolSim, LastFreedChunkIsReusedFirst) {
    PoolState s;
    auto [s1, a] = allocate(s, AllocationKind::Other, 0x11000);
    auto [s2, b] = allocate(s1, AllocationKind::Other, 0x11000);
    auto s3 = free(free(s2, a.id), b.id);
    auto [s4, c] = allocate(s3, AllocationKind::ResultListBuffer, 0x10fe8);
    EXPECT_EQ(c.address, b.address);
    auto [s5, d] = allocate(s4, AllocationKind::Other, 0x10000);
    EXPECT_EQ(d.address, a.address);
    EXPECT_EQ(d.size, 0x11000u);  // whole chunk taken
}

TEST(PoolSim, TooSmallTopChunkFallsBackToBump) {
    PoolState s;
    auto [s1, a] = allocate(s, AllocationKind::SrvReserve1, 0x10000);
    auto s2 = free(s1, a.id);
    auto [s3, b] = allocate(s2, AllocationKind::SrvnetConnection, 0x11000);
    EXPECT_EQ(b.address, 0x10010000u);
    EXPECT_EQ(s3.free_chunks().size(), 1u);
}

TEST(PoolSim, SrvnetHeadersStartIntact) {
    PoolState s;
    auto [s1, a] = allocate(s, AllocationKind::SrvnetConnection, 0x11000);
    ASSERT_TRUE(a.header);
    EXPECT_EQ(a.header->p_mdl, a.address + 0x200);
    EXPECT_EQ(a.header->p_handler_function, 0x5E4E0000u);
    EXPECT_EQ(deliver_and_disconnect(s1, a.id), DeliveryOutcome::BenignDisconnect);
}

TEST(PoolSim, UnknownIdsAreRejected) {
    PoolState s;
    EXPECT_THROW(free(s, AllocationId{42}), PoolError);
    auto [s1, a] = allocate(s, AllocationKind::Other, 0x100);
    auto s2 = free(s1, a.id);
    try {
        free(s2, a.id);
        FAIL();
    } catch (const PoolError& e) {
        EXPECT_EQ(e.kind(), PoolError::Kind::UnknownAllocation);
    }
    EXPECT_THROW(deliver_and_disconnect(s1, a.id), PoolError);  // not a Srvnet connection
}

TEST(PoolSim, OverflowWithinSlackTouchesNothing) {
    PoolState s;
    auto [s1, a] = allocate(s, AllocationKind::ResultListBuffer, 0x10fe8);
    auto [s2, b] = allocate(s1, AllocationKind::SrvnetConnection, 0x11000);
    EXPECT_EQ(apply_overflow(s2, a.id, Bytes(0x18, 0xEE)), s2);
    auto s3 = apply_overflow(s2, a.id, Bytes(0x19, 0xEE));
    EXPECT_TRUE(s3.find(b.id)->header_overwritten);
    EXPECT_EQ(s3.find(b.id)->header, s2.find(b.id)->header);  // garbage does not decode
}

TEST(PoolSim, OverflowImageReplacesNeighbourHeader) {
    PoolState s;
    auto [s1, a] = allocate(s, AllocationKind::ResultListBuffer, 0x10fe8);
    auto [s2, b] = allocate(s1, AllocationKind::SrvnetConnection, 0x11000);
    Bytes overflow(0x18, 0xEE);
    const SrvnetHeaderImage forged{0x7A7A0000, 0x7A7A0000};
    const auto image = forged.serialize();
    overflow.insert(overflow.end(), image.begin(), image.end());
    auto s3 = apply_overflow(s2, a.id, overflow);
    EXPECT_EQ(s3.find(b.id)->header, forged);
    EXPECT_EQ(deliver_and_disconnect(s3, b.id), DeliveryOutcome::PayloadWouldExecute);
}

TEST(PoolSim, OverflowIntoNothingIsAnError) {
    PoolState s;
    auto [s1, a] = allocate(s, AllocationKind::ResultListBuffer, 0x10fe8);
    try {
        apply_overflow(s1, a.id, Bytes(0x100, 0));
        FAIL();
    } catch (const PoolError& e) {
        EXPECT_EQ(e.kind(), PoolError::Kind::NoAdjacentAllocation);
    }
}

TEST(PoolSimProperty, RandomScriptsNeverOverlap) {
    Gen g(0xA110C);
    for (int script = 0; script < 1000; ++script) {
        PoolState s;
        std::vector<AllocationId> live;
        for (int step = 0, n = static_cast<int>(g.range(5, 80)); step < n; ++step) {
            if (!live.empty() && g.chance(40)) {
                const auto i = g.range(0, live.size() - 1);
                s = free(s, live[i]);
                live.erase(live.begin() + static_cast<std::ptrdiff_t>(i));
            } else {
                const std::size_t size = g.chance(30) ? 0x11000 : g.range(1, 0x20000);
                const auto kind = g.chance(30) ? AllocationKind::SrvnetConnection : AllocationKind::Other;
                auto [next, a] = allocate(s, kind, size);
                ASSERT_GE(a.size, a.requested);
                s = std::move(next);
                live.push_back(a.id);
            }
            ASSERT_TRUE(no_two_overlap(s)) << "script " << script << " step " << step;
            ASSERT_TRUE(free_chunks_unused(s)) << "script " << script << " step " << step;
            ASSERT_EQ(allocations_disjoint(s), true);
        }
    }
}

TEST(Grooming, ParsesAndFormatsScripts) {
    const auto script = parse_groom_script(
        "# timeline\n"
        "RESERVE reserve1 0x10000\n"
        "srvnet 13   # first wave\n"
        "\n"
        "Reserve RESERVE2 69632\n"
        "FREE 2\n"
        "CONVERT bug=off\n"
        "DELIVER all\n");
    ASSERT_EQ(script.size(), 6u);
    EXPECT_EQ(script[0].line, 2);
    EXPECT_EQ(script[2].size, 0x11000u);
    EXPECT_FALSE(script[4].bug_enabled);
    EXPECT_EQ(script[5].connection, kAllConnections);
    const auto again = parse_groom_script(format_groom_script(script));
    ASSERT_EQ(again.size(), script.size());
    for (std::size_t i = 0; i < script.size(); ++i) EXPECT_EQ(format_step(again[i]), format_step(script[i]));
}

TEST(Grooming, ScriptErrorsNameTheLine) {
    auto line_of = [](const char* text) {
        try {
            run_grooming_script(parse_groom_script(text));
        } catch (const ScriptError& e) {
            return e.line();
        }
        return -1;
    };
    EXPECT_EQ(line_of("SRVNET 2\nJUMP 3\n"), 2);
    EXPECT_EQ(line_of("RESERVE reserve1 0x10000\nFREE 2\nFREE 2\n"), 3);
    EXPECT_EQ(line_of("RESERVE reserve9 10\n"), 1);
    EXPECT_EQ(line_of("RESERVE other 0\n"), 1);
    EXPECT_EQ(line_of("SRVNET 1\n\nCONVERT bug=on\nCONVERT bug=on\n"), 4);
    EXPECT_EQ(line_of("RESERVE other 100\nDELIVER 2\n"), 2);
    EXPECT_EQ(line_of("FREE\n"), 1);
}

TEST(Grooming, CanonicalTimeline) {
    const auto r = run_grooming_script(canonical_script(true));
    // Reserve 2 is connection 16 and sits after reserve 1 plus 13 Srvnet buffers.
    const VirtualAddress reserve2 = 0x10000000 + 0x10000 + 13 * 0x11000;
    ASSERT_TRUE(r.result_buffer);
    const auto* result = r.trace[6].state.find(*r.result_buffer);
    ASSERT_NE(result, nullptr);
    EXPECT_EQ(result->address, reserve2);
    EXPECT_EQ(result->kind, AllocationKind::ResultListBuffer);
    EXPECT_EQ(r.adjacency, Adjacency::Adjacent);
    EXPECT_EQ(r.adjacent_connection, 17);
    EXPECT_EQ(r.conversion->records_converted, 607u);
    EXPECT_EQ(r.verdict(), DeliveryOutcome::PayloadWouldExecute);

    std::size_t executed = 0;
    for (const auto& [conn, o] : r.deliveries) executed += o == DeliveryOutcome::PayloadWouldExecute;
    EXPECT_EQ(executed, 1u);
    EXPECT_EQ(r.deliveries.size(), 19u);
}

TEST(Grooming, FixedConversionIsHarmless) {
    const auto r = run_grooming_script(canonical_script(false));
    EXPECT_EQ(r.adjacency, Adjacency::Adjacent);  // layout is the same
    EXPECT_EQ(r.conversion->records_converted, 606u);
    for (const auto& [conn, o] : r.deliveries) EXPECT_EQ(o, DeliveryOutcome::BenignDisconnect) << conn;
    EXPECT_EQ(r.verdict(), DeliveryOutcome::BenignDisconnect);
}

TEST(Grooming, WithoutTheSecondFreeTheBufferLandsElsewhere) {
    auto script = canonical_script(true);
    script.erase(script.begin() + 5);  // FREE 16
    const auto r = run_grooming_script(script);
    EXPECT_EQ(r.adjacency, Adjacency::NotAdjacent);
    EXPECT_EQ(r.verdict(), DeliveryOutcome::BenignDisconnect);
}

TEST(Grooming, RenderShowsHijackedHeader) {
    const auto r = run_grooming_script(canonical_script(true));
    const auto text = render_state(r.trace[6].state, r.connections);
    EXPECT_NE(text.find("HIJACKED"), std::string::npos);
    EXPECT_NE(text.find("0x7a7a0000"), std::string::npos);
}
