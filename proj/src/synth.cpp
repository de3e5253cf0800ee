#include "robofp/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace robofp {

namespace {

constexpr TimeRange kFluidGap{2.0, 6.0};
constexpr TimeRange kTappingGap{0.3, 1.5};
constexpr TimeRange kGripperGap{0.8, 2.0};
constexpr TimeRange kSpeedGap{0.5, 1.5};

int draw_size(const SizeRange &range, Rng &rng) { return rng.uniform_int(range.lo, range.hi); }

void require(bool ok, const std::string &what) {
    if (!ok) {
        throw std::invalid_argument{what};
    }
}

bool valid_size_range(const SizeRange &r) { return r.lo >= 1 && r.hi <= kMtu && r.lo <= r.hi; }

std::vector<ScriptStep> fluid_script() {
    // open, approach, close (grasp), transport, open (release), retreat
    return {
        {CommandKind::GripperSpeed, 1, 1, kSpeedGap, 0.5, true},
        {CommandKind::GripperPosition, 1, 1, kGripperGap, 1.0, false},
        {CommandKind::CartesianMove, 1, 2, kFluidGap, 1.0, false},
        {CommandKind::GripperPosition, 1, 1, kGripperGap, 1.0, false},
        {CommandKind::CartesianMove, 1, 2, kFluidGap, 1.0, false},
        {CommandKind::GripperPosition, 1, 1, kGripperGap, 1.0, false},
        {CommandKind::CartesianMove, 0, 1, kFluidGap, 1.0, false},
    };
}

std::vector<ScriptStep> tapping_script() {
    // close the gripper, move right away, approach, tap, retreat
    return {
        {CommandKind::GripperSpeed, 1, 1, kSpeedGap, 0.5, true},
        {CommandKind::GripperPosition, 1, 1, kSpeedGap, 1.0, false},
        {CommandKind::CartesianMove, 1, 1, kTappingGap, 1.0, false},
        {CommandKind::CartesianMove, 1, 2, kFluidGap, 1.0, false},
        {CommandKind::CartesianMove, 2, 3, kTappingGap, 1.0, false},
        {CommandKind::CartesianMove, 1, 2, kFluidGap, 1.0, false},
    };
}

nlohmann::json range_json(const SizeRange &r) { return nlohmann::json::array({r.lo, r.hi}); }
nlohmann::json range_json(const TimeRange &r) { return nlohmann::json::array({r.lo, r.hi}); }

void read_range(const nlohmann::json &j, const char *key, SizeRange &r) {
    if (j.contains(key)) {
        r = {j.at(key).at(0).get<int>(), j.at(key).at(1).get<int>()};
    }
}

void read_range(const nlohmann::json &j, const char *key, TimeRange &r) {
    if (j.contains(key)) {
        r = {j.at(key).at(0).get<double>(), j.at(key).at(1).get<double>()};
    }
}

template <typename T>
void read_value(const nlohmann::json &j, const char *key, T &out) {
    if (j.contains(key)) {
        out = j.at(key).get<T>();
    }
}

} // namespace

void CommandTemplate::validate() const {
    const std::string name{to_string(kind)};
    require(valid_size_range(out_size), name + ": bad out_size range");
    require(jitter >= 0.0 && jitter < 0.5, name + ": jitter must be in [0, 0.5)");
    require(feedback_delay >= 0.0, name + ": negative feedback_delay");
    switch (kind) {
    case CommandKind::CartesianMove:
        require(valid_size_range(feedback_size), name + ": bad feedback_size range");
        require(feedback_size.lo > out_size.hi, name + ": feedback packets must be larger than command packets");
        break;
    case CommandKind::GripperPosition:
        require(valid_size_range(feedback_size), name + ": bad feedback_size range");
        [[fallthrough]];
    case CommandKind::GripperSpeed:
        require(packet_rate > 0.0, name + ": packet_rate must be positive");
        require(duration.lo > 0.0 && duration.lo <= duration.hi, name + ": bad duration range");
        require(feedback_delay < 1.0 / packet_rate, name + ": feedback_delay exceeds the exchange period");
        if (kind == CommandKind::GripperSpeed && feedback_size.hi > 0) {
            require(valid_size_range(feedback_size), name + ": bad feedback_size range");
        }
        break;
    }
}

CommandTemplate default_command_template(CommandKind kind) {
    CommandTemplate t;
    t.kind = kind;
    switch (kind) {
    case CommandKind::CartesianMove:
        t.out_size = {150, 250};
        t.feedback_size = {400, 900};
        t.feedback_delay = 0.03;
        t.jitter = 0.02;
        break;
    case CommandKind::GripperPosition:
        t.out_size = {100, 140};
        t.feedback_size = {100, 140};
        t.packet_rate = 25.0;
        t.feedback_delay = 0.02;
        t.duration = {0.6, 1.2};
        t.jitter = 0.02;
        break;
    case CommandKind::GripperSpeed:
        t.out_size = {64, 96};
        t.feedback_size = {0, 0};
        t.packet_rate = 80.0;
        t.duration = {1.5, 3.0};
        t.jitter = 0.02;
        break;
    }
    return t;
}

void ActionTemplate::validate() const {
    const std::string name{to_string(label)};
    require(!script.empty(), name + ": empty script");
    require(duration.lo > 0.0 && duration.lo <= duration.hi, name + ": bad duration range");
    require(valid_size_range(cartesian_feedback), name + ": bad cartesian_feedback range");
    require(lead_idle.lo >= 0.0 && lead_idle.lo <= lead_idle.hi, name + ": bad lead_idle");
    require(tail_idle.lo >= 0.0 && tail_idle.lo <= tail_idle.hi, name + ": bad tail_idle");
    for (const auto &step : script) {
        require(step.min_count >= 0 && step.min_count <= step.max_count, name + ": bad step count");
        require(step.gap.lo > 0.0 && step.gap.lo <= step.gap.hi, name + ": bad step gap");
        require(step.probability >= 0.0 && step.probability <= 1.0, name + ": bad step probability");
    }
}

ActionTemplate default_action_template(ActionLabel label) {
    ActionTemplate a;
    a.label = label;
    switch (label) {
    case ActionLabel::PickAndPlace:
        a.script = fluid_script();
        a.cartesian_feedback = {450, 700};
        break;
    case ActionLabel::PourWater:
        a.script = fluid_script();
        a.cartesian_feedback = {600, 850};
        break;
    case ActionLabel::TurnOnSwitch:
        a.script = tapping_script();
        a.cartesian_feedback = {450, 700};
        break;
    case ActionLabel::PressKey:
        a.script = tapping_script();
        a.cartesian_feedback = {600, 850};
        break;
    }
    return a;
}

void GenConfig::validate() const {
    require(samples_per_class >= 1, "samples_per_class must be at least 1");
    for (std::size_t i = 0; i < kNumCommandKinds; ++i) {
        require(commands[i].kind == kAllCommandKinds[i], "command templates out of order");
        commands[i].validate();
    }
    for (std::size_t i = 0; i < kNumActions; ++i) {
        require(actions[i].label == kAllActions[i], "action templates out of order");
        actions[i].validate();
        CommandTemplate cart = commands[0];
        cart.feedback_size = actions[i].cartesian_feedback;
        cart.validate();
    }
    require(valid_size_range(keepalive.size), "keepalive: bad size range");
    require(keepalive.interval > 0.0, "keepalive: interval must be positive");
    require(keepalive.jitter >= 0.0 && keepalive.jitter < 1.0, "keepalive: jitter must be in [0, 1)");
}

std::vector<PacketRecord> gen_command(const CommandTemplate &tmpl, double start_time, Rng &rng) {
    double duration = 0.0;
    if (tmpl.kind != CommandKind::CartesianMove) {
        duration = rng.uniform(tmpl.duration.lo, tmpl.duration.hi);
    }
    return gen_command(tmpl, start_time, duration, rng);
}

std::vector<PacketRecord> gen_command(const CommandTemplate &tmpl, double start_time, double duration, Rng &rng) {
    std::vector<PacketRecord> out;
    auto noise = [&](double scale) { return tmpl.jitter * scale * (2.0 * rng.uniform() - 1.0); };

    if (tmpl.kind == CommandKind::CartesianMove) {
        out.push_back({start_time, kOutgoing, draw_size(tmpl.out_size, rng)});
        const double delay = tmpl.feedback_delay * (1.0 + noise(1.0));
        out.push_back({start_time + delay, kIncoming, draw_size(tmpl.feedback_size, rng)});
        return out;
    }

    const double period = 1.0 / tmpl.packet_rate;
    const long count = std::max(1L, std::lround(duration * tmpl.packet_rate));
    const bool with_feedback = tmpl.feedback_size.hi > 0;
    out.reserve(static_cast<std::size_t>(count) * (with_feedback ? 2 : 1));
    for (long k = 0; k < count; ++k) {
        const double t = start_time + static_cast<double>(k) * period + (k > 0 ? noise(period) : 0.0);
        out.push_back({t, kOutgoing, draw_size(tmpl.out_size, rng)});
        if (with_feedback) {
            const double fb = t + tmpl.feedback_delay + noise(period) * 0.25;
            out.push_back({fb, kIncoming, draw_size(tmpl.feedback_size, rng)});
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const auto &a, const auto &b) { return a.t < b.t; });
    return out;
}

GeneratedTrace gen_action_detailed(ActionLabel label, const GenConfig &config, Rng &rng) {
    const ActionTemplate &action = config.action(label);
    CommandTemplate cartesian = config.command(CommandKind::CartesianMove);
    cartesian.feedback_size = action.cartesian_feedback;

    auto template_for = [&](CommandKind kind) -> const CommandTemplate & {
        return kind == CommandKind::CartesianMove ? cartesian : config.command(kind);
    };

    constexpr int kMaxAttempts = 1000;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        std::vector<ScriptStep> steps = action.script;
        for (std::size_t i = 0; i + 1 < steps.size(); ++i) {
            if (steps[i].swappable && rng.bernoulli(0.5)) {
                std::swap(steps[i], steps[i + 1]);
                ++i;
            }
        }

        std::vector<PacketRecord> packets;
        std::vector<CommandEvent> events;
        double cursor = 0.0;
        for (const auto &step : steps) {
            if (!rng.bernoulli(step.probability)) {
                continue;
            }
            const int count = rng.uniform_int(step.min_count, step.max_count);
            for (int c = 0; c < count; ++c) {
                if (!events.empty()) {
                    cursor += rng.log_uniform(step.gap.lo, step.gap.hi);
                }
                auto burst = gen_command(template_for(step.kind), cursor, rng);
                events.push_back({step.kind, burst.front().t, burst.back().t});
                cursor = burst.back().t;
                packets.insert(packets.end(), burst.begin(), burst.end());
            }
        }

        const double lead = rng.uniform(action.lead_idle.lo, action.lead_idle.hi);
        const double tail = rng.uniform(action.tail_idle.lo, action.tail_idle.hi);
        double duration = lead + cursor + tail;
        if (duration > action.duration.hi) {
            continue;
        }
        duration = std::max(duration, action.duration.lo);

        for (auto &p : packets) {
            p.t += lead;
        }
        for (auto &e : events) {
            e.start += lead;
            e.end += lead;
        }

        // keep-alive chatter, silent while a command burst is on the wire
        const auto &ka = config.keepalive;
        auto busy = [&](double t) {
            return std::any_of(events.begin(), events.end(), [&](const CommandEvent &e) {
                return t >= e.start - ka.guard && t <= e.end + ka.guard;
            });
        };
        for (int dir : {kOutgoing, kIncoming}) {
            double t = dir == kOutgoing ? 0.0 : rng.uniform(0.0, ka.interval);
            while (t < duration) {
                if (!busy(t) && (dir == kIncoming || t > 0.0)) {
                    packets.push_back({t, dir, draw_size(ka.size, rng)});
                }
                t += ka.interval * (1.0 + ka.jitter * (2.0 * rng.uniform() - 1.0));
            }
        }
        packets.push_back({0.0, kOutgoing, draw_size(ka.size, rng)});
        packets.push_back({duration, kOutgoing, draw_size(ka.size, rng)});
        std::stable_sort(packets.begin(), packets.end(), [](const auto &a, const auto &b) { return a.t < b.t; });

        GeneratedTrace out;
        out.trace.packets = std::move(packets);
        out.trace.label = label;
        out.events = std::move(events);
        return out;
    }
    throw std::runtime_error{"cannot fit a " + std::string{to_string(label)} + " script into its duration range"};
}

Trace gen_action(ActionLabel label, const GenConfig &config, Rng &rng) {
    return gen_action_detailed(label, config, rng).trace;
}

std::uint64_t trace_seed(const GenConfig &config, ActionLabel label, int index) {
    return derive_seed(config.seed, index_of(label), static_cast<std::uint64_t>(index));
}

std::string trace_name(ActionLabel label, int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "_%03d", index);
    return std::string{to_string(label)} + buf;
}

Dataset gen_dataset(const GenConfig &config) {
    config.validate();
    Dataset ds;
    ds.traces.reserve(kNumActions * static_cast<std::size_t>(config.samples_per_class));
    for (auto label : kAllActions) {
        for (int i = 0; i < config.samples_per_class; ++i) {
            Rng rng{trace_seed(config, label, i)};
            Trace trace = gen_action(label, config, rng);
            trace.trace_id = trace_name(label, i);
            ds.traces.push_back(std::move(trace));
        }
    }
    return ds;
}

Dataset gen_dataset(const GenConfig &config, const std::filesystem::path &out_dir) {
    Dataset ds = gen_dataset(config);
    std::vector<std::pair<std::string, ActionLabel>> rows;
    rows.reserve(ds.traces.size());
    for (const auto &trace : ds.traces) {
        const std::string rel = "traces/" + trace.trace_id + ".csv";
        write_trace_file(out_dir / rel, trace);
        rows.emplace_back(rel, *trace.label);
    }
    ds.manifest_path = out_dir / "manifest.csv";
    write_manifest(ds.manifest_path, rows);
    write_text_file(out_dir / "gen_config.json", to_json(config).dump(2) + "\n");
    return ds;
}

nlohmann::json to_json(const GenConfig &config) {
    nlohmann::json j;
    j["seed"] = config.seed;
    j["samples_per_class"] = config.samples_per_class;
    auto &commands = j["commands"];
    for (const auto &c : config.commands) {
        commands[std::string{to_string(c.kind)}] = {
            {"out_size", range_json(c.out_size)},
            {"feedback_size", range_json(c.feedback_size)},
            {"packet_rate", c.packet_rate},
            {"feedback_delay", c.feedback_delay},
            {"duration", range_json(c.duration)},
            {"jitter", c.jitter},
        };
    }
    auto &actions = j["actions"];
    for (const auto &a : config.actions) {
        nlohmann::json script = nlohmann::json::array();
        for (const auto &s : a.script) {
            script.push_back({
                {"kind", std::string{to_string(s.kind)}},
                {"count", nlohmann::json::array({s.min_count, s.max_count})},
                {"gap", range_json(s.gap)},
                {"probability", s.probability},
                {"swappable", s.swappable},
            });
        }
        actions[std::string{to_string(a.label)}] = {
            {"script", script},
            {"duration", range_json(a.duration)},
            {"cartesian_feedback", range_json(a.cartesian_feedback)},
            {"lead_idle", range_json(a.lead_idle)},
            {"tail_idle", range_json(a.tail_idle)},
        };
    }
    j["keepalive"] = {
        {"size", range_json(config.keepalive.size)},
        {"interval", config.keepalive.interval},
        {"jitter", config.keepalive.jitter},
        {"guard", config.keepalive.guard},
    };
    return j;
}

GenConfig gen_config_from_json(const nlohmann::json &j) {
    GenConfig config;
    read_value(j, "seed", config.seed);
    read_value(j, "samples_per_class", config.samples_per_class);
    if (j.contains("commands")) {
        for (const auto &[name, cj] : j.at("commands").items()) {
            auto kind = parse_command_kind(name);
            if (!kind) {
                throw std::invalid_argument{"unknown command kind '" + name + "'"};
            }
            auto &c = config.commands[index_of(*kind)];
            read_range(cj, "out_size", c.out_size);
            read_range(cj, "feedback_size", c.feedback_size);
            read_value(cj, "packet_rate", c.packet_rate);
            read_value(cj, "feedback_delay", c.feedback_delay);
            read_range(cj, "duration", c.duration);
            read_value(cj, "jitter", c.jitter);
        }
    }
    if (j.contains("actions")) {
        for (const auto &[name, aj] : j.at("actions").items()) {
            auto label = parse_action_label(name);
            if (!label) {
                throw std::invalid_argument{"unknown action '" + name + "'"};
            }
            auto &a = config.actions[index_of(*label)];
            if (aj.contains("script")) {
                a.script.clear();
                for (const auto &sj : aj.at("script")) {
                    ScriptStep s;
                    auto kind = parse_command_kind(sj.at("kind").get<std::string>());
                    if (!kind) {
                        throw std::invalid_argument{"unknown command kind in script of " + name};
                    }
                    s.kind = *kind;
                    if (sj.contains("count")) {
                        s.min_count = sj.at("count").at(0).get<int>();
                        s.max_count = sj.at("count").at(1).get<int>();
                    }
                    read_range(sj, "gap", s.gap);
                    read_value(sj, "probability", s.probability);
                    read_value(sj, "swappable", s.swappable);
                    a.script.push_back(s);
                }
            }
            read_range(aj, "duration", a.duration);
            read_range(aj, "cartesian_feedback", a.cartesian_feedback);
            read_range(aj, "lead_idle", a.lead_idle);
            read_range(aj, "tail_idle", a.tail_idle);
        }
    }
    if (j.contains("keepalive")) {
        const auto &kj = j.at("keepalive");
        read_range(kj, "size", config.keepalive.size);
        read_value(kj, "interval", config.keepalive.interval);
        read_value(kj, "jitter", config.keepalive.jitter);
        read_value(kj, "guard", config.keepalive.guard);
    }
    config.validate();
    return config;
}

} // namespace robofp
