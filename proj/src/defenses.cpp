#include "robofp/defenses.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

namespace robofp {

namespace {

// guards floor(L / t_i) against values like 0.001 / 0.0001 = 9.999...
constexpr double kRatioEps = 1e-9;
constexpr double kSlotEps = 1e-12;

std::uint64_t total_bytes(const Trace &trace) {
    std::uint64_t s = 0;
    for (const auto &p : trace.packets) {
        s += static_cast<std::uint64_t>(p.size);
    }
    return s;
}

double overhead_ratio(std::uint64_t original, std::uint64_t defended) {
    if (original == 0) {
        return 0.0;
    }
    return (static_cast<double>(defended) - static_cast<double>(original)) / static_cast<double>(original);
}

int slot_budget(double t_i, double L) { return static_cast<int>(std::floor(L / t_i + kRatioEps)); }

std::string short_number(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

struct Segment {
    std::size_t original = 0;
    int size = 0;
    int payload = 0;
    double arrival = 0.0;
    bool last = false;
};

struct Emitted {
    double t = 0.0;
    int size = 0;
    int payload = 0;
    bool dummy = true;
    std::size_t original = 0;
};

// One direction's constant-rate stream.
std::vector<Emitted> modulate_direction(const Trace &trace, int dir, const ModulationConfig &cfg,
                                        std::vector<double> &latency) {
    std::deque<Segment> pending;
    std::vector<Emitted> out;
    std::size_t next = 0;
    const auto &pk = trace.packets;
    auto advance_to_dir = [&] {
        while (next < pk.size() && pk[next].dir != dir) {
            ++next;
        }
    };
    advance_to_dir();
    if (next == pk.size()) {
        return out;
    }
    double stop_at = -1.0;
    for (std::uint64_t k = 0;; ++k) {
        const double slot = static_cast<double>(k) * cfg.t_i;
        while (next < pk.size() && pk[next].t <= slot + kSlotEps) {
            const SegmentPlan plan = segment_plan(pk[next].size, cfg.s_p, cfg.t_i, cfg.L);
            int left = pk[next].size;
            for (int s = 0; s < plan.n; ++s) {
                const int carried = std::min(left, plan.s_c);
                left -= carried;
                pending.push_back({next, plan.s_c, carried, pk[next].t, s + 1 == plan.n});
            }
            ++next;
            advance_to_dir();
        }
        if (!pending.empty()) {
            const Segment seg = pending.front();
            pending.pop_front();
            out.push_back({slot, seg.size, seg.payload, false, seg.original});
            if (seg.last) {
                latency[seg.original] = slot - seg.arrival;
            }
            if (pending.empty() && next == pk.size()) {
                stop_at = slot + cfg.tail_dummies;
            }
            continue;
        }
        if (stop_at >= 0.0) {
            if (slot > stop_at + kSlotEps) {
                break;
            }
            out.push_back({slot, cfg.s_p, 0, true, 0});
        } else if (cfg.idle_dummies) {
            out.push_back({slot, cfg.s_p, 0, true, 0});
        }
    }
    return out;
}

} // namespace

DefenseError::DefenseError(DefenseErrorKind kind, const std::string &detail)
    : std::runtime_error{detail}, kind_{kind} {}

void PaddingConfig::validate() const {
    if (x < 1 || x > 10) {
        throw DefenseError{DefenseErrorKind::InvalidConfig, "padding x must be in 1..10, got " + std::to_string(x)};
    }
    if (mtu != kMtu) {
        throw DefenseError{DefenseErrorKind::InvalidConfig, "padding mtu must be " + std::to_string(kMtu)};
    }
}

void ModulationConfig::validate() const {
    if (s_p < 1) {
        throw DefenseError{DefenseErrorKind::InvalidConfig, "s_p must be at least 1"};
    }
    if (!(t_i > 0.0) || !std::isfinite(t_i)) {
        throw DefenseError{DefenseErrorKind::InvalidConfig, "t_i must be positive"};
    }
    if (!(L >= t_i) || !std::isfinite(L)) {
        throw DefenseError{DefenseErrorKind::InvalidConfig, "L must be at least t_i"};
    }
    if (tail_dummies < 0.0) {
        throw DefenseError{DefenseErrorKind::InvalidConfig, "tail_dummies must be non-negative"};
    }
}

std::string DefenseConfig::name() const {
    if (type == DefenseType::Padding) {
        return "padding-x" + std::to_string(padding.x);
    }
    return "modulation-sp" + std::to_string(modulation.s_p) + "-ti" + short_number(modulation.t_i);
}

nlohmann::json to_json(const DefenseConfig &cfg) {
    if (cfg.type == DefenseType::Padding) {
        return {{"type", "padding"}, {"x", cfg.padding.x}};
    }
    const auto &m = cfg.modulation;
    return {{"type", "modulation"}, {"s_p", m.s_p},
            {"t_i", m.t_i},         {"L", m.L},
            {"tail_dummies", m.tail_dummies}, {"idle_dummies", m.idle_dummies}};
}

DefenseConfig defense_config_from_json(const nlohmann::json &j) {
    DefenseConfig cfg;
    const auto type = j.at("type").get<std::string>();
    if (type == "padding") {
        cfg.type = DefenseType::Padding;
        cfg.padding.x = j.at("x").get<int>();
        cfg.padding.validate();
    } else if (type == "modulation") {
        cfg.type = DefenseType::Modulation;
        auto &m = cfg.modulation;
        if (j.contains("preset")) {
            m = modulation_preset(j.at("preset").get<std::string>(), j.at("s_p").get<int>());
        } else {
            m.s_p = j.at("s_p").get<int>();
            m.t_i = j.at("t_i").get<double>();
            m.L = j.value("L", m.t_i);
        }
        m.tail_dummies = j.value("tail_dummies", m.tail_dummies);
        m.idle_dummies = j.value("idle_dummies", m.idle_dummies);
        m.validate();
    } else {
        throw DefenseError{DefenseErrorKind::InvalidConfig, "unknown defense type '" + type + "'"};
    }
    return cfg;
}

ModulationConfig modulation_preset(const std::string &name, int s_p) {
    ModulationConfig m;
    m.s_p = s_p;
    if (name == "rate-10ms") {
        m.t_i = 0.01;
    } else if (name == "rate-1ms") {
        m.t_i = 0.001;
    } else if (name == "rate-100us") {
        m.t_i = 0.0001;
    } else {
        throw DefenseError{DefenseErrorKind::InvalidConfig, "unknown modulation preset '" + name + "'"};
    }
    m.L = std::max(0.001, m.t_i);
    m.validate();
    return m;
}

int pad_packet(int size, int x) {
    if (size < 1 || size > kMtu) {
        throw DefenseError{DefenseErrorKind::OutOfRange, "packet size " + std::to_string(size) + " outside 1..1500"};
    }
    if (x < 1 || x > 10) {
        throw DefenseError{DefenseErrorKind::OutOfRange, "padding x " + std::to_string(x) + " outside 1..10"};
    }
    const int unit = 100 * x;
    return std::min((size + unit - 1) / unit * unit, kMtu);
}

SegmentPlan segment_plan(int s_o, int s_p, double t_i, double L) {
    if (s_o < 1 || s_p < 1 || !(t_i > 0.0) || !(L >= t_i)) {
        throw DefenseError{DefenseErrorKind::InvalidConfig, "segment_plan needs s_o, s_p >= 1, t_i > 0, L >= t_i"};
    }
    if (s_o <= s_p) {
        return {s_p, 1};
    }
    const int m = (s_o + s_p - 1) / s_p;
    const int budget = slot_budget(t_i, L);
    if (m > budget) {
        return {(s_o + budget - 1) / budget, budget};
    }
    return {s_p, m};
}

std::pair<DefendedTrace, DefenseReport> apply_padding_defense(const Trace &trace, const PaddingConfig &cfg) {
    cfg.validate();
    DefendedTrace d;
    d.trace = trace;
    d.is_dummy.assign(trace.packets.size(), 0);
    d.payload.resize(trace.packets.size());
    d.provenance.resize(trace.packets.size());
    for (std::size_t i = 0; i < trace.packets.size(); ++i) {
        d.payload[i] = trace.packets[i].size;
        d.trace.packets[i].size = pad_packet(trace.packets[i].size, cfg.x);
        d.provenance[i] = {i};
    }
    DefenseReport r;
    r.original_bytes = total_bytes(trace);
    r.defended_bytes = total_bytes(d.trace);
    r.bandwidth_overhead = overhead_ratio(r.original_bytes, r.defended_bytes);
    return {std::move(d), r};
}

std::pair<DefendedTrace, DefenseReport> apply_modulation_defense(const Trace &trace, const ModulationConfig &cfg) {
    cfg.validate();
    std::vector<double> latency(trace.packets.size(), 0.0);
    const auto out = modulate_direction(trace, kOutgoing, cfg, latency);
    const auto in = modulate_direction(trace, kIncoming, cfg, latency);

    DefendedTrace d;
    d.trace.label = trace.label;
    d.trace.trace_id = trace.trace_id;
    d.provenance.resize(trace.packets.size());
    const std::size_t total = out.size() + in.size();
    d.trace.packets.reserve(total);
    d.is_dummy.reserve(total);
    d.payload.reserve(total);
    auto emit = [&](const Emitted &e, int dir) {
        if (!e.dummy) {
            d.provenance[e.original].push_back(d.trace.packets.size());
        }
        d.trace.packets.push_back({e.t, dir, e.size});
        d.is_dummy.push_back(e.dummy ? 1 : 0);
        d.payload.push_back(e.payload);
    };
    // both streams share the slot grid; outgoing goes first on equal times
    std::size_t a = 0, b = 0;
    while (a < out.size() || b < in.size()) {
        if (b == in.size() || (a < out.size() && out[a].t <= in[b].t)) {
            emit(out[a++], kOutgoing);
        } else {
            emit(in[b++], kIncoming);
        }
    }

    DefenseReport r;
    r.original_bytes = total_bytes(trace);
    r.defended_bytes = total_bytes(d.trace);
    r.bandwidth_overhead = overhead_ratio(r.original_bytes, r.defended_bytes);
    r.dummy_packets = static_cast<std::size_t>(std::count(d.is_dummy.begin(), d.is_dummy.end(), 1));
    if (!latency.empty()) {
        double sum = 0.0;
        for (double l : latency) {
            r.max_added_latency = std::max(r.max_added_latency, l);
            sum += l;
        }
        r.mean_added_latency = sum / static_cast<double>(latency.size());
    }
    return {std::move(d), r};
}

std::pair<DefendedTrace, DefenseReport> apply_defense(const Trace &trace, const DefenseConfig &cfg) {
    return cfg.type == DefenseType::Padding ? apply_padding_defense(trace, cfg.padding)
                                            : apply_modulation_defense(trace, cfg.modulation);
}

double bandwidth_overhead(const Trace &original, const DefendedTrace &defended) {
    return overhead_ratio(total_bytes(original), total_bytes(defended.trace));
}

nlohmann::json provenance_json(const DefendedTrace &d) {
    nlohmann::json map = nlohmann::json::array();
    for (const auto &v : d.provenance) {
        map.push_back(v);
    }
    std::vector<std::size_t> dummies;
    for (std::size_t i = 0; i < d.is_dummy.size(); ++i) {
        if (d.is_dummy[i]) {
            dummies.push_back(i);
        }
    }
    return {{"trace_id", d.trace.trace_id},
            {"provenance", std::move(map)},
            {"dummy_indices", std::move(dummies)},
            {"payload", d.payload}};
}

nlohmann::json to_json(const DefenseReport &r) {
    return {{"bandwidth_overhead", r.bandwidth_overhead},
            {"max_added_latency", r.max_added_latency},
            {"mean_added_latency", r.mean_added_latency},
            {"original_bytes", r.original_bytes},
            {"defended_bytes", r.defended_bytes},
            {"dummy_packets", r.dummy_packets}};
}

} // namespace robofp
