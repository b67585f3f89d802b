// SMB1 message model: byte-exact parse and serialize for the commands the
// analysis pipeline cares about. Anything else is carried as opaque bytes.

#ifndef ETLAB_SMB_HPP
#define ETLAB_SMB_HPP

#include "etlab/bytes.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace etlab::smb {

namespace command {
inline constexpr std::uint8_t kTransaction = 0x25;
inline constexpr std::uint8_t kEcho = 0x2B;
inline constexpr std::uint8_t kTransaction2 = 0x32;
inline constexpr std::uint8_t kTransaction2Secondary = 0x33;
inline constexpr std::uint8_t kNegotiate = 0x72;
inline constexpr std::uint8_t kSessionSetupAndX = 0x73;
inline constexpr std::uint8_t kTreeConnectAndX = 0x75;
inline constexpr std::uint8_t kNtTransact = 0xA0;
inline constexpr std::uint8_t kNtTransactSecondary = 0xA1;
inline constexpr std::uint8_t kNoAndX = 0xFF;
}  // namespace command

namespace status {
inline constexpr std::uint32_t kSuccess = 0x00000000;
inline constexpr std::uint32_t kNotImplemented = 0xC0000002;
inline constexpr std::uint32_t kInsuffServerResources = 0xC0000205;
}  // namespace status

namespace subcommand {
inline constexpr std::uint16_t kPeekNamedPipe = 0x0023;   // Trans
inline constexpr std::uint16_t kTrans2FindFirst2 = 0x0001;
inline constexpr std::uint16_t kTrans2SessionSetup = 0x000E;  // DoublePulsar ping carrier
}  // namespace subcommand

inline constexpr std::uint8_t kFlagsReply = 0x80;
inline constexpr std::uint32_t kCapExtendedSecurity = 0x80000000;
inline constexpr std::size_t kHeaderSize = 32;
inline constexpr std::size_t kNetBiosHeaderSize = 4;

// Multiplex ID values a DoublePulsar ping response carries.
inline constexpr std::uint16_t kDoublePulsarPresentMid = 0x51;
inline constexpr std::uint16_t kDoublePulsarAbsentMid = 0x41;

struct SmbHeader {
    std::uint8_t command = 0;
    std::uint32_t nt_status = 0;
    std::uint8_t flags = 0x18;
    std::uint16_t flags2 = 0x4003;  // NT status codes, long names, EAs
    std::uint16_t process_id_high = 0;
    std::array<std::uint8_t, 8> security_features{};
    std::uint16_t reserved = 0;
    std::uint16_t tree_id = 0;
    std::uint16_t process_id = 0;
    std::uint16_t user_id = 0;
    std::uint16_t multiplex_id = 0;

    bool is_reply() const { return (flags & kFlagsReply) != 0; }
    bool operator==(const SmbHeader&) const = default;
};

/// Parameter block (word_count 16-bit words) followed by the data block
/// (byte_count bytes). The declared counts are stored so that a
/// hand-built block whose counts disagree with its contents is rejected at
/// serialization instead of silently fixed.
struct SmbBlock {
    std::uint8_t word_count = 0;
    Bytes words;
    std::uint16_t byte_count = 0;
    Bytes bytes;

    static SmbBlock from(Bytes words, Bytes bytes);
    std::uint16_t word(std::size_t i) const;
    bool operator==(const SmbBlock&) const = default;
};

enum class Anomaly : std::uint8_t {
    TrailingBytes,               // data after the declared byte block
    UnexpectedWordCount,         // known request command with an unusual parameter layout
    ExtendedSecurityMismatch,    // 12-word Session Setup without CAP_EXTENDED_SECURITY
    TransactionOffsetOutOfRange  // parameter/data window points outside the message
};

std::string to_string(Anomaly a);

struct TransactionRequest {  // Trans and Trans2 primary requests
    std::uint16_t total_parameter_count = 0;
    std::uint16_t total_data_count = 0;
    std::uint16_t max_parameter_count = 0;
    std::uint16_t max_data_count = 0;
    std::uint8_t max_setup_count = 0;
    std::uint16_t flags = 0;
    std::uint32_t timeout = 0;
    std::uint16_t parameter_count = 0;
    std::uint16_t parameter_offset = 0;
    std::uint16_t data_count = 0;
    std::uint16_t data_offset = 0;
    std::vector<std::uint16_t> setup;
    Bytes parameters;
    Bytes data;

    std::optional<std::uint16_t> subcommand() const {
        return setup.empty() ? std::nullopt : std::optional(setup.front());
    }
    bool operator==(const TransactionRequest&) const = default;
};

struct Trans2SecondaryRequest {
    std::uint16_t total_parameter_count = 0;
    std::uint16_t total_data_count = 0;
    std::uint16_t parameter_count = 0;
    std::uint16_t parameter_offset = 0;
    std::uint16_t parameter_displacement = 0;
    std::uint16_t data_count = 0;
    std::uint16_t data_offset = 0;
    std::uint16_t data_displacement = 0;
    std::uint16_t fid = 0;
    Bytes parameters;
    Bytes data;
    bool operator==(const Trans2SecondaryRequest&) const = default;
};

struct NtTransRequest {
    std::uint8_t max_setup_count = 0;
    std::uint32_t total_parameter_count = 0;
    std::uint32_t total_data_count = 0;
    std::uint32_t max_parameter_count = 0;
    std::uint32_t max_data_count = 0;
    std::uint32_t parameter_count = 0;
    std::uint32_t parameter_offset = 0;
    std::uint32_t data_count = 0;
    std::uint32_t data_offset = 0;
    std::uint16_t function = 0;
    std::vector<std::uint16_t> setup;
    Bytes parameters;
    Bytes data;
    bool operator==(const NtTransRequest&) const = default;
};

struct SessionSetupRequest {
    std::uint8_t andx_command = command::kNoAndX;
    std::uint16_t andx_offset = 0;
    std::uint16_t max_buffer_size = 0;
    std::uint16_t max_mpx_count = 0;
    std::uint16_t vc_number = 0;
    std::uint32_t session_key = 0;
    bool extended_form = false;  // 12-word layout
    std::uint16_t security_blob_length = 0;
    std::uint32_t capabilities = 0;
    bool operator==(const SessionSetupRequest&) const = default;
};

struct Negotiate {
    std::vector<std::string> dialects;  // request only
    bool operator==(const Negotiate&) const = default;
};
struct SessionSetupAndX {
    std::optional<SessionSetupRequest> request;
    bool operator==(const SessionSetupAndX&) const = default;
};
struct TreeConnectAndX {
    std::optional<std::string> path;
    bool operator==(const TreeConnectAndX&) const = default;
};
struct Echo {
    std::optional<std::uint16_t> echo_count;
    bool operator==(const Echo&) const = default;
};
struct Trans {
    std::optional<TransactionRequest> request;
    bool is_peek_named_pipe() const {
        return request && request->subcommand() == subcommand::kPeekNamedPipe;
    }
    bool operator==(const Trans&) const = default;
};
struct Trans2 {
    std::optional<TransactionRequest> request;
    bool operator==(const Trans2&) const = default;
};
struct Trans2Secondary {
    std::optional<Trans2SecondaryRequest> request;
    bool operator==(const Trans2Secondary&) const = default;
};
struct NtTrans {
    std::optional<NtTransRequest> request;
    bool operator==(const NtTrans&) const = default;
};
struct Opaque {
    bool operator==(const Opaque&) const = default;
};

/// Typed view of the command body. Decoded from the raw block, so it never
/// disagrees with the bytes it came from.
using SmbCommandBody = std::variant<Negotiate, SessionSetupAndX, TreeConnectAndX, Echo, Trans,
                                    Trans2, Trans2Secondary, NtTrans, Opaque>;

struct SmbMessage {
    SmbHeader header;
    std::optional<SmbBlock> block;  // absent when the message ends right after the header
    Bytes trailing;
    SmbCommandBody body = Opaque{};
    std::vector<Anomaly> anomalies;

    bool has_anomaly(Anomaly a) const;
    /// Size of the SMB message without NetBIOS framing.
    std::size_t wire_size() const;
    bool operator==(const SmbMessage&) const = default;
};

enum class Framing { NetBios, Bare };

class SmbParseError : public std::runtime_error {
public:
    enum class Kind { TooShort, BadMagic, TruncatedBlock, FrameLengthMismatch };
    SmbParseError(Kind kind, std::size_t offset, std::size_t expected, std::size_t actual);

    Kind kind() const { return kind_; }
    std::size_t offset() const { return offset_; }
    std::size_t expected() const { return expected_; }
    std::size_t actual() const { return actual_; }

private:
    Kind kind_;
    std::size_t offset_, expected_, actual_;
};

class SmbInvariantError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Parses one SMB1 message. Throws SmbParseError and nothing else.
SmbMessage parse_smb(ByteView bytes, Framing framing = Framing::NetBios);
/// Throws SmbInvariantError when a block's declared counts disagree with its contents.
Bytes serialize_smb(const SmbMessage& msg, Framing framing = Framing::NetBios);

/// Builds a message through the same decode path the parser uses.
SmbMessage make_message(const SmbHeader& header, std::optional<SmbBlock> block,
                        Bytes trailing = {});

/// Start of the data block relative to the SMB header for a block with
/// `word_count` parameter words. Transaction offsets are measured from here.
constexpr std::size_t data_block_start(std::size_t word_count) {
    return kHeaderSize + 1 + 2 * word_count + 2;
}

// Builders for the request layouts. Offsets are computed; parameters and data
// are placed 4-byte aligned relative to the SMB header.
struct TransactionParams {
    std::uint16_t total_parameter_count = 0;  // 0: use parameters.size()
    std::uint16_t total_data_count = 0;       // 0: use data.size()
    std::uint16_t max_parameter_count = 0;
    std::uint16_t max_data_count = 0;
    std::uint8_t max_setup_count = 0;
    std::uint16_t flags = 0;
    std::uint32_t timeout = 0;
    std::vector<std::uint16_t> setup;
    std::string name;  // Trans only: null-terminated transaction name ahead of the parameters
    Bytes parameters;
    Bytes data;
};
SmbBlock encode_transaction_request(const TransactionParams& p);

struct Trans2SecondaryParams {
    std::uint16_t total_parameter_count = 0;
    std::uint16_t total_data_count = 0;
    std::uint16_t parameter_displacement = 0;
    std::uint16_t data_displacement = 0;
    std::uint16_t fid = 0;
    Bytes parameters;
    Bytes data;
};
SmbBlock encode_trans2_secondary(const Trans2SecondaryParams& p);

struct NtTransParams {
    std::uint8_t max_setup_count = 0;
    std::uint32_t total_parameter_count = 0;
    std::uint32_t total_data_count = 0;
    std::uint32_t max_parameter_count = 0;
    std::uint32_t max_data_count = 0;
    std::uint16_t function = 0;
    std::vector<std::uint16_t> setup;
    Bytes parameters;
    Bytes data;
};
SmbBlock encode_nt_trans_request(const NtTransParams& p);

SmbBlock encode_negotiate_request(const std::vector<std::string>& dialects);
SmbBlock encode_session_setup_request(const SessionSetupRequest& r, ByteView data);
SmbBlock encode_tree_connect_request(const std::string& path);
SmbBlock encode_echo_request(std::uint16_t echo_count, ByteView data);

// -- Response signals ------------------------------------------------------

enum class ResponseSignal { VulnerableMs17_010, DoublePulsarPresent, DoublePulsarAbsent, NoSignal };

std::string to_string(ResponseSignal s);

ResponseSignal classify_response(const SmbMessage& msg);

/// A reconnaissance request together with the response signal it elicits.
class ProbePacket {
public:
    enum class Kind { PeekNamedPipe, DoublePulsarPing };
    enum class Signal { NtStatusValue, MultiplexIdValue };

    explicit ProbePacket(Kind kind) : kind_(kind), signal_(signal_for(kind)) {}
    /// Throws std::invalid_argument for a kind/signal pairing that cannot occur.
    ProbePacket(Kind kind, Signal signal);

    Kind kind() const { return kind_; }
    Signal expected_response_signal() const { return signal_; }

    /// The request message. `header` supplies tree/process/user ids.
    SmbMessage request(SmbHeader header) const;

    static Signal signal_for(Kind kind) {
        return kind == Kind::PeekNamedPipe ? Signal::NtStatusValue : Signal::MultiplexIdValue;
    }

private:
    Kind kind_;
    Signal signal_;
};

std::string command_name(std::uint8_t command);

}  // namespace etlab::smb

#endif
