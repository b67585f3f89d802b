// Multi-connection recognizer for the pool-grooming attack. Events are
// correlated per (attacker, victim) host pair, since the choreography spans
// a couple of dozen TCP connections.

#ifndef ETLAB_DETECTOR_HPP
#define ETLAB_DETECTOR_HPP

#include "etlab/flow_event.hpp"

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace etlab::detect {

enum class AttackStage : std::uint8_t {
    Idle = 0,
    Probe,         // 1  vulnerability and backdoor probes
    ListUpload,    // 2  NT Trans followed by Trans2 Secondary
    ListEcho,      // 3
    Reserve1,      // 4  oversized session setup
    SrvnetWave1,   // 5  raw connections
    Reserve2,      // 6
    FreeReserve1,  // 7  FIN
    SrvnetWave2,   // 8
    WaveEcho,      // 9  optional
    FreeReserve2,  // 10 FIN
    Trigger,       // 11 final list segment
    Payload,       // 12 data over the raw connections
    Complete,      // raw connections closed
};

inline constexpr int kStageCount = 12;

std::string to_string(AttackStage s);
constexpr int stage_number(AttackStage s) { return static_cast<int>(s); }
/// Accepts a stage name, its number, or "stage-N".
std::optional<AttackStage> parse_stage(std::string_view text);

enum class AnomalyTag : std::uint8_t {
    PeekNamedPipeProbe,
    DoublePulsarPing,
    VulnerableProbeResponse,   // Trans reply with the insufficient-resources status
    DoublePulsarPresent,
    TransactionTypeMismatch,
    OversizedFeaList,
    OversizedNonPagedPoolReserve,
    NonSmbDataOnSmbPort,
};

std::string to_string(AnomalyTag t);

enum class Verdict { Benign, Suspicious, EternalblueSequence };

std::string to_string(Verdict v);

struct DetectorConfig {
    AttackStage conviction_stage = AttackStage::Trigger;
    std::chrono::microseconds stage_timeout = std::chrono::seconds(300);
    std::size_t wave_min_connections = 3;
    std::uint32_t oversized_reserve = 0x10000;
    std::uint32_t oversized_list = 0x10000;
};

struct DetectionReport {
    Ipv4 attacker = 0;
    Ipv4 victim = 0;
    AttackStage max_stage = AttackStage::Idle;
    std::map<AttackStage, Timestamp> stage_timestamps;
    std::vector<AnomalyTag> anomalies;  // first occurrence order, no repeats
    Verdict verdict = Verdict::Benign;

    bool operator==(const DetectionReport&) const = default;
};

/// Multi-line record with a fixed field order.
std::string to_text(const DetectionReport& r);

struct StageTransition {
    Ipv4 attacker = 0;
    Ipv4 victim = 0;
    AttackStage from = AttackStage::Idle;
    AttackStage to = AttackStage::Idle;
    Timestamp timestamp{0};
    bool operator==(const StageTransition&) const = default;
};

class OutOfOrderEvent : public std::runtime_error {
public:
    OutOfOrderEvent(const FlowKey& flow, Timestamp previous, Timestamp got);
};

class UnknownHost : public std::runtime_error {
public:
    explicit UnknownHost(Ipv4 host);
};

/// Feeds for one host pair are serialized internally; feeds for different
/// pairs may run on different threads.
class GroomDetector {
public:
    explicit GroomDetector(DetectorConfig config = {});
    ~GroomDetector();
    GroomDetector(const GroomDetector&) = delete;
    GroomDetector& operator=(const GroomDetector&) = delete;

    const DetectorConfig& config() const { return config_; }

    /// Throws OutOfOrderEvent, leaving state untouched, if the event is older
    /// than the last one seen on its flow.
    std::optional<StageTransition> feed(const FlowEvent& event);

    /// One report per victim the attacker touched, in victim order.
    std::vector<DetectionReport> finalize(Ipv4 attacker) const;
    std::vector<DetectionReport> finalize_all() const;

private:
    struct PairState;
    using PairKey = std::pair<Ipv4, Ipv4>;

    PairState& state_for(const PairKey& key);
    DetectionReport report(const PairKey& key, const PairState& s) const;

    DetectorConfig config_;
    mutable std::shared_mutex registry_mutex_;
    std::map<PairKey, std::unique_ptr<PairState>> pairs_;
};

struct Rule {
    std::string id;
    AttackStage stage = AttackStage::Idle;
    std::string title;
    std::vector<std::string> conditions;
};

struct RuleDocument {
    std::vector<Rule> rules;
    std::string to_text() const;
};

RuleDocument emit_rules(const DetectorConfig& config = {});

/// Analyst-facing description of one stage.
std::string explain(AttackStage stage);
/// Every stage, in order.
std::string explain_all();

}  // namespace etlab::detect

#endif
