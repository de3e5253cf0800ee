// synth.hpp
//
// Seedable generator of labeled robot-action traces. Each action is a script of
// command bursts (Cartesian moves, gripper position and gripper speed commands)
// laid over low-rate keep-alive chatter.

#ifndef ROBOFP_SYNTH_HPP
#define ROBOFP_SYNTH_HPP

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "robofp/command.hpp"
#include "robofp/rng.hpp"
#include "robofp/trace.hpp"

namespace robofp {

struct SizeRange {
    int lo = 1;
    int hi = 1;
};

struct TimeRange {
    double lo = 0.0;
    double hi = 0.0;
};

/// Traffic envelope of one command.
///
/// CartesianMove: one command packet followed by one feedback packet after
/// `feedback_delay`. GripperPosition: command/feedback exchanges at `packet_rate`
/// for a duration drawn from `duration`. GripperSpeed: outgoing command packets at
/// `packet_rate`; feedback only when `feedback_size.hi > 0`.
/// `jitter` perturbs each packet time by up to jitter * period (not accumulated).
struct CommandTemplate {
    CommandKind kind = CommandKind::CartesianMove;
    SizeRange out_size;
    SizeRange feedback_size;
    double packet_rate = 0.0;
    double feedback_delay = 0.0;
    TimeRange duration;
    double jitter = 0.0;

    /// throws std::invalid_argument on an inconsistent template
    void validate() const;
};

CommandTemplate default_command_template(CommandKind kind);

struct ScriptStep {
    CommandKind kind = CommandKind::CartesianMove;
    int min_count = 1;
    int max_count = 1;
    TimeRange gap;               ///< log-uniform idle time before each repetition
    double probability = 1.0;    ///< the step is skipped with 1 - probability
    bool swappable = false;      ///< may trade places with the following step
};

struct ActionTemplate {
    ActionLabel label = ActionLabel::PickAndPlace;
    std::vector<ScriptStep> script;
    TimeRange duration{5.0, 30.0};
    SizeRange cartesian_feedback{400, 900};   ///< overrides the Cartesian template's feedback sizes
    TimeRange lead_idle{0.2, 2.0};
    TimeRange tail_idle{0.3, 2.0};

    void validate() const;
};

ActionTemplate default_action_template(ActionLabel label);

struct KeepAliveConfig {
    SizeRange size{40, 80};
    double interval = 0.5;   ///< mean spacing per direction
    double jitter = 0.2;
    double guard = 0.05;     ///< no keep-alives within this margin of a command burst
};

struct GenConfig {
    std::uint64_t seed = 42;
    int samples_per_class = 50;
    std::array<CommandTemplate, kNumCommandKinds> commands{
        default_command_template(CommandKind::CartesianMove),
        default_command_template(CommandKind::GripperPosition),
        default_command_template(CommandKind::GripperSpeed)};
    std::array<ActionTemplate, kNumActions> actions{
        default_action_template(ActionLabel::PickAndPlace), default_action_template(ActionLabel::PourWater),
        default_action_template(ActionLabel::TurnOnSwitch), default_action_template(ActionLabel::PressKey)};
    KeepAliveConfig keepalive;

    const CommandTemplate &command(CommandKind kind) const { return commands[index_of(kind)]; }
    const ActionTemplate &action(ActionLabel label) const { return actions[index_of(label)]; }
    void validate() const;
};

/// A command burst placed in a generated trace, kept for ground-truth checks.
struct CommandEvent {
    CommandKind kind;
    double start = 0.0;
    double end = 0.0;   ///< time of the burst's last packet
};

struct GeneratedTrace {
    Trace trace;
    std::vector<CommandEvent> events;
};

std::vector<PacketRecord> gen_command(const CommandTemplate &tmpl, double start_time, Rng &rng);

/// Same as gen_command with the burst duration fixed instead of drawn.
std::vector<PacketRecord> gen_command(const CommandTemplate &tmpl, double start_time, double duration, Rng &rng);

GeneratedTrace gen_action_detailed(ActionLabel label, const GenConfig &config, Rng &rng);
Trace gen_action(ActionLabel label, const GenConfig &config, Rng &rng);

/// Seed of trace `index` of class `label`; traces can be generated independently.
std::uint64_t trace_seed(const GenConfig &config, ActionLabel label, int index);

std::string trace_name(ActionLabel label, int index);

/// Generates the balanced dataset in memory, class-major order.
Dataset gen_dataset(const GenConfig &config);

/// Generates and writes `traces/<id>.csv`, `manifest.csv` and `gen_config.json` under `out_dir`.
Dataset gen_dataset(const GenConfig &config, const std::filesystem::path &out_dir);

nlohmann::json to_json(const GenConfig &config);
/// Reads a config; absent keys keep their defaults.
GenConfig gen_config_from_json(const nlohmann::json &j);

} // namespace robofp

#endif // ROBOFP_SYNTH_HPP
