#include "etlab/cli.hpp"

#include "etlab/capture.hpp"
#include "etlab/detector.hpp"
#include "etlab/grooming.hpp"
#include "etlab/trace_gen.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

namespace etlab::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Format { Text, Machine };

/// One tunable, resolvable from a flag, the environment or the config file.
struct Setting {
    std::string name;
    CLI::Option* option = nullptr;
    std::string value;
};

class Settings {
public:
    void add(CLI::App& app, const std::string& name, const std::string& help, std::string fallback = {}) {
        auto s = std::make_unique<Setting>();
        s->name = name;
        s->value = std::move(fallback);
        s->option = app.add_option("--" + name, s->value, help);
        by_name_[name] = s.get();
        all_.push_back(std::move(s));
    }

    /// Fills every setting the command line left unset.
    void resolve(const std::string& command, const std::string& config_path) {
        std::map<std::string, std::string> config;
        if (!config_path.empty()) {
            if (!fs::exists(config_path)) throw UsageError("config file not found: " + config_path);
            for (const auto& item : CLI::ConfigTOML().from_file(config_path)) {
                if (item.inputs.empty()) continue;
                const bool global = item.parents.empty();
                const bool ours = item.parents.size() == 1 && item.parents[0] == command;
                // Section-scoped values override top-level ones.
                if (ours || (global && !config.count(item.name))) config[item.name] = item.inputs.front();
            }
        }
        for (auto& s : all_) {
            if (s->option->count() > 0) continue;
            if (const char* env = std::getenv(env_name(s->name).c_str())) {
                s->value = env;
                from_[s->name] = "environment";
            } else if (auto it = config.find(s->name); it != config.end()) {
                s->value = it->second;
                from_[s->name] = "config";
            }
        }
    }

    bool has(const std::string& name) const { return !get(name).empty(); }
    bool given(const std::string& name) const {
        auto* s = by_name_.at(name);
        return s->option->count() > 0 || from_.count(name);
    }
    const std::string& get(const std::string& name) const { return by_name_.at(name)->value; }

    static std::string env_name(const std::string& name) {
        std::string out = "ETLAB_";
        for (char c : name) out += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        return out;
    }

private:
    std::vector<std::unique_ptr<Setting>> all_;
    std::map<std::string, Setting*> by_name_;
    std::map<std::string, std::string> from_;
};

Format parse_format(const std::string& v) {
    if (v == "text") return Format::Text;
    if (v == "machine") return Format::Machine;
    throw UsageError("--format must be text or machine, got '" + v + "'");
}

bool parse_switch(const std::string& v) {
    if (v == "on" || v == "true" || v == "1") return true;
    if (v == "off" || v == "false" || v == "0") return false;
    throw UsageError("--bug must be on or off, got '" + v + "'");
}

std::uint64_t parse_seed(const std::string& v) {
    try {
        std::size_t used = 0;
        const auto n = std::stoull(v, &used, 0);
        if (used == v.size()) return n;
    } catch (const std::exception&) {
    }
    throw UsageError("--seed must be an unsigned integer, got '" + v + "'");
}

detect::AttackStage parse_threshold(const std::string& v) {
    auto s = detect::parse_stage(v);
    if (!s || *s == detect::AttackStage::Idle) throw UsageError("--threshold-stage must name a stage 1..13, got '" + v + "'");
    return *s;
}

void require_readable(const std::string& path, const std::string& what) {
    if (path.empty()) throw UsageError(what + " path is required (--input)");
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) throw UsageError(what + " not found: " + path);
}

void require_writable_target(const std::string& path) {
    const fs::path parent = fs::path(path).parent_path();
    std::error_code ec;
    if (!parent.empty() && !fs::is_directory(parent, ec))
        throw UsageError("output directory does not exist: " + parent.string());
}

/// Writes to --output when given, otherwise to `out`.
void emit(const Settings& s, std::ostream& out, const std::string& text) {
    if (!s.has("output")) {
        out << text;
        return;
    }
    std::ofstream f(s.get("output"), std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + s.get("output"));
    f << text;
    if (!f) throw std::runtime_error("short write to " + s.get("output"));
}

ordered_json to_json(const detect::DetectionReport& r) {
    ordered_json j;
    j["attacker"] = format_ipv4(r.attacker);
    j["victim"] = format_ipv4(r.victim);
    j["verdict"] = detect::to_string(r.verdict);
    j["max_stage"] = detect::stage_number(r.max_stage);
    j["max_stage_name"] = detect::to_string(r.max_stage);
    ordered_json stages = ordered_json::array();
    for (const auto& [stage, ts] : r.stage_timestamps)
        stages.push_back({{"stage", detect::stage_number(stage)},
                          {"name", detect::to_string(stage)},
                          {"timestamp_us", ts.count()}});
    j["stages"] = std::move(stages);
    ordered_json anomalies = ordered_json::array();
    for (auto a : r.anomalies) anomalies.push_back(detect::to_string(a));
    j["anomalies"] = std::move(anomalies);
    return j;
}

int cmd_detect(const Settings& s, bool verbose, std::ostream& out, std::ostream& err) {
    require_readable(s.get("input"), "capture");
    if (s.has("output")) require_writable_target(s.get("output"));
    const Format format = parse_format(s.get("format"));
    detect::DetectorConfig config;
    if (s.has("threshold-stage")) config.conviction_stage = parse_threshold(s.get("threshold-stage"));

    const auto events = capture::read_capture(fs::path(s.get("input")));
    detect::GroomDetector detector(config);
    for (const auto& e : events) {
        if (auto t = detector.feed(e); t && verbose)
            err << "transition " << format_ipv4(t->attacker) << " -> " << format_ipv4(t->victim) << ": "
                << detect::to_string(t->from) << " => " << detect::to_string(t->to) << "\n";
    }
    const auto reports = detector.finalize_all();

    std::ostringstream text;
    bool found = false;
    for (const auto& r : reports) {
        found = found || r.verdict == detect::Verdict::EternalblueSequence;
        if (format == Format::Machine)
            text << to_json(r).dump() << "\n";
        else
            text << detect::to_text(r);
    }
    if (format == Format::Text && reports.empty()) text << "no SMB traffic found\n";
    emit(s, out, text.str());
    return found ? kExitAttackFound : kExitOk;
}

int cmd_simulate(const Settings& s, std::ostream& out) {
    const Format format = parse_format(s.get("format"));
    pool::GroomScript script;
    if (s.has("input")) {
        require_readable(s.get("input"), "script");
        std::ifstream f(s.get("input"));
        std::stringstream buf;
        buf << f.rdbuf();
        script = pool::parse_groom_script(buf.str());
        if (s.given("bug")) {
            const bool bug = parse_switch(s.get("bug"));
            for (auto& step : script)
                if (step.kind == pool::GroomStep::Kind::Convert) step.bug_enabled = bug;
        }
    } else {
        script = pool::canonical_script(parse_switch(s.get("bug")));
    }
    if (s.has("output")) require_writable_target(s.get("output"));

    const auto result = pool::run_grooming_script(script);
    std::ostringstream text;
    if (format == Format::Machine) {
        for (const auto& snap : result.trace) {
            ordered_json j;
            j["step"] = pool::format_step(snap.step);
            j["line"] = snap.step.line;
            j["live_allocations"] = snap.state.allocations().size();
            j["free_chunks"] = snap.state.free_chunks().size();
            j["note"] = snap.note;
            text << j.dump() << "\n";
        }
        ordered_json j;
        j["adjacency"] = result.adjacency == pool::Adjacency::Adjacent ? "Adjacent" : "NotAdjacent";
        if (result.adjacent_connection) j["adjacent_connection"] = *result.adjacent_connection;
        j["verdict"] = pool::to_string(result.verdict());
        text << j.dump() << "\n";
    } else {
        int n = 0;
        for (const auto& snap : result.trace) {
            text << "step " << ++n << ": " << pool::format_step(snap.step) << "\n";
            if (!snap.note.empty()) text << "  " << snap.note << "\n";
            text << pool::render_state(snap.state, result.connections) << "\n";
        }
        text << "adjacency: " << (result.adjacency == pool::Adjacency::Adjacent ? "Adjacent" : "NotAdjacent");
        if (result.adjacent_connection) text << " (connection " << *result.adjacent_connection << ")";
        text << "\nverdict: " << pool::to_string(result.verdict()) << "\n";
    }
    emit(s, out, text.str());
    return kExitOk;
}

int cmd_gen_trace(const Settings& s, std::ostream& out) {
    if (!s.has("output")) throw UsageError("gen-trace needs --output");
    require_writable_target(s.get("output"));
    const auto scenario = capture::Scenario::parse(s.get("scenario"));
    const auto seed = parse_seed(s.get("seed"));
    const auto file = capture::generate_trace(scenario, seed);
    file.save(s.get("output"));
    out << "wrote " << file.records.size() << " packets (" << capture::to_string(scenario) << ", seed " << seed
        << ") to " << s.get("output") << "\n";
    return kExitOk;
}

int cmd_emit_rules(const Settings& s, std::ostream& out) {
    if (s.has("output")) require_writable_target(s.get("output"));
    emit(s, out, detect::emit_rules().to_text());
    return kExitOk;
}

int cmd_explain(const std::string& topic, std::ostream& out) {
    if (topic.empty() || topic == "all") {
        out << detect::explain_all();
        return kExitOk;
    }
    auto stage = detect::parse_stage(topic);
    if (!stage) throw UsageError("unknown stage '" + topic + "' (try stage-1 .. stage-12, or all)");
    out << detect::explain(*stage);
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"SMB1 pool-grooming lab: detection, simulation and synthetic traces", "etlab"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "TOML/INI file with default settings");
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "Log stage transitions to stderr");

    Settings detect_s, simulate_s, gen_s, rules_s;
    auto* detect = app.add_subcommand("detect", "Scan a capture for the grooming sequence");
    detect_s.add(*detect, "input", "Capture file");
    detect_s.add(*detect, "output", "Report file (default stdout)");
    detect_s.add(*detect, "format", "text or machine", "text");
    detect_s.add(*detect, "threshold-stage", "Stage at which a pair is convicted (default 11)");

    auto* simulate = app.add_subcommand("simulate", "Replay a grooming script against the pool model");
    simulate_s.add(*simulate, "input", "Script file (default: built-in timeline)");
    simulate_s.add(*simulate, "output", "Output file (default stdout)");
    simulate_s.add(*simulate, "bug", "on or off", "on");
    simulate_s.add(*simulate, "format", "text or machine", "text");

    auto* gen = app.add_subcommand("gen-trace", "Write a synthetic capture");
    gen_s.add(*gen, "scenario", "benign, full-attack or truncated:N", "full-attack");
    gen_s.add(*gen, "seed", "Generator seed", "1");
    gen_s.add(*gen, "output", "Capture file to write");

    auto* rules = app.add_subcommand("emit-rules", "Print the signature document");
    rules_s.add(*rules, "output", "Output file (default stdout)");

    auto* explain = app.add_subcommand("explain", "Describe attack stages");
    std::string topic;
    explain->add_option("stage", topic, "stage-N, a stage name, or all");

    // CLI11 consumes a vector in reverse order, program name excluded.
    std::vector<std::string> rest;
    if (!args.empty()) rest.assign(args.rbegin(), args.rend() - 1);
    try {
        app.parse(rest);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitError;
    }

    try {
        if (detect->parsed()) {
            detect_s.resolve("detect", config_path);
            return cmd_detect(detect_s, verbose, out, err);
        }
        if (simulate->parsed()) {
            simulate_s.resolve("simulate", config_path);
            return cmd_simulate(simulate_s, out);
        }
        if (gen->parsed()) {
            gen_s.resolve("gen-trace", config_path);
            return cmd_gen_trace(gen_s, out);
        }
        if (rules->parsed()) {
            rules_s.resolve("emit-rules", config_path);
            return cmd_emit_rules(rules_s, out);
        }
        return cmd_explain(topic, out);
    } catch (const pool::ScriptError& e) {
        err << "error: script " << e.what() << "\n";
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
    }
    return kExitError;
}

}  // namespace etlab::cli
