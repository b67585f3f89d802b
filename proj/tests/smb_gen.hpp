// Random SMB1 messages built through the typed encoders.

#ifndef ETLAB_TESTS_SMB_GEN_HPP
#define ETLAB_TESTS_SMB_GEN_HPP

#include "etlab/smb.hpp"

#include "support.hpp"

namespace etlab::testing {

using namespace etlab::smb;

inline SmbHeader random_header(Gen& g, std::uint8_t cmd) {
    SmbHeader h;
    h.command = cmd;
    h.nt_status = g.chance(70) ? 0 : g.u32();
    h.flags = g.u8();
    h.flags2 = static_cast<std::uint16_t>(g.u16() & 0x7FFF);
    h.process_id_high = g.u16();
    for (auto& b : h.security_features) b = g.u8();
    h.reserved = g.chance(90) ? 0 : g.u16();
    h.tree_id = g.u16();
    h.process_id = g.u16();
    h.user_id = g.u16();
    h.multiplex_id = g.u16();
    return h;
}

inline std::vector<std::uint16_t> random_setup(Gen& g) {
    std::vector<std::uint16_t> s(g.range(0, 3));
    for (auto& w : s) w = g.u16();
    return s;
}

/// A message from one of the typed encoders, or a raw block for any command.
inline SmbMessage random_message(Gen& g) {
    static constexpr std::uint8_t kCommands[] = {
        command::kTransaction, command::kEcho,           command::kTransaction2,
        command::kTransaction2Secondary, command::kNegotiate, command::kSessionSetupAndX,
        command::kTreeConnectAndX, command::kNtTransact,  0x04, 0x2E, 0x2F, 0xA2};
    const auto cmd = kCommands[g.range(0, std::size(kCommands) - 1)];
    SmbHeader h = random_header(g, cmd);
    if (g.chance(10)) return make_message(h, std::nullopt);

    std::optional<SmbBlock> block;
    if (!g.chance(25)) {
        switch (cmd) {
        case command::kTransaction:
        case command::kTransaction2: {
            TransactionParams p;
            p.max_parameter_count = g.u16();
            p.max_data_count = g.u16();
            p.flags = g.u16();
            p.timeout = g.u32();
            p.setup = random_setup(g);
            if (cmd == command::kTransaction && g.chance(50)) p.name = "\\PIPE\\";
            p.parameters = g.bytes(g.range(0, 40));
            p.data = g.bytes(g.range(0, 300));
            block = encode_transaction_request(p);
            break;
        }
        case command::kTransaction2Secondary: {
            Trans2SecondaryParams p;
            p.total_data_count = g.u16();
            p.data_displacement = g.u16();
            p.fid = g.u16();
            p.parameters = g.bytes(g.range(0, 10));
            p.data = g.bytes(g.range(0, 500));
            block = encode_trans2_secondary(p);
            break;
        }
        case command::kNtTransact: {
            NtTransParams p;
            p.max_setup_count = g.u8();
            p.total_data_count = g.u32();
            p.function = g.u16();
            p.setup = random_setup(g);
            p.parameters = g.bytes(g.range(0, 40));
            p.data = g.bytes(g.range(0, 500));
            block = encode_nt_trans_request(p);
            break;
        }
        case command::kSessionSetupAndX: {
            SessionSetupRequest r;
            r.max_buffer_size = g.u16();
            r.session_key = g.u32();
            r.extended_form = g.chance(50);
            r.capabilities = g.u32();
            block = encode_session_setup_request(r, g.bytes(g.range(0, 80)));
            break;
        }
        case command::kNegotiate: block = encode_negotiate_request({"LANMAN1.0", "NT LM 0.12"}); break;
        case command::kTreeConnectAndX: block = encode_tree_connect_request("\\\\host\\IPC$"); break;
        case command::kEcho: block = encode_echo_request(g.u16(), g.bytes(g.range(0, 64))); break;
        default: break;
        }
    }
    if (!block) block = SmbBlock::from(g.bytes(2 * g.range(0, 30)), g.bytes(g.range(0, 200)));
    Bytes trailing = g.chance(15) ? g.bytes(g.range(1, 40)) : Bytes{};
    return make_message(h, std::move(block), std::move(trailing));
}

}  // namespace etlab::testing

#endif
