// defenses.hpp
//
// Trace-to-trace traffic shaping: size padding to multiples of x * 100 bytes and
// latency-bounded constant-rate modulation, with overhead and latency accounting.

#ifndef ROBOFP_DEFENSES_HPP
#define ROBOFP_DEFENSES_HPP

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "robofp/trace.hpp"

namespace robofp {

enum class DefenseErrorKind { OutOfRange, InvalidConfig };

class DefenseError : public std::runtime_error {
public:
    DefenseError(DefenseErrorKind kind, const std::string &detail);
    DefenseErrorKind kind() const noexcept { return kind_; }

private:
    DefenseErrorKind kind_;
};

struct PaddingConfig {
    int x = 1;   ///< pad to multiples of x * 100 bytes, 1..10
    int mtu = kMtu;

    void validate() const;
};

struct ModulationConfig {
    int s_p = 500;             ///< fixed packet size (bytes)
    double t_i = 0.01;         ///< send interval (s)
    double L = 0.01;           ///< permissible added latency (s)
    double tail_dummies = 0.0; ///< seconds of dummies after a direction's last real segment
    bool idle_dummies = true;  ///< fill idle slots between messages with dummies

    void validate() const;
};

enum class DefenseType { Padding, Modulation };

struct DefenseConfig {
    DefenseType type = DefenseType::Padding;
    PaddingConfig padding;
    ModulationConfig modulation;

    /// short identifier such as "padding-x3" or "modulation-sp500-ti0.0001"
    std::string name() const;
};

nlohmann::json to_json(const DefenseConfig &cfg);
/// Accepts {type, x} / {type, s_p, t_i, L, tail_dummies, idle_dummies} or {type: "modulation", preset, s_p}.
DefenseConfig defense_config_from_json(const nlohmann::json &j);

/// Named send-rate presets: "rate-10ms", "rate-1ms", "rate-100us".
/// The latency budget is 1 ms, raised to t_i where t_i is larger.
ModulationConfig modulation_preset(const std::string &name, int s_p);

struct DefendedTrace {
    Trace trace;
    std::vector<char> is_dummy;
    std::vector<int> payload;                          ///< real bytes carried by each emitted packet
    std::vector<std::vector<std::size_t>> provenance;  ///< original index -> emitted indices
};

struct DefenseReport {
    double bandwidth_overhead = 0.0;
    double max_added_latency = 0.0;
    double mean_added_latency = 0.0;
    std::uint64_t original_bytes = 0;
    std::uint64_t defended_bytes = 0;
    std::size_t dummy_packets = 0;
};

/// min(ceil(size / (100x)) * 100x, 1500). Throws OutOfRange outside 1..1500 / 1..10.
int pad_packet(int size, int x);

struct SegmentPlan {
    int s_c = 0;   ///< bytes per segment
    int n = 0;     ///< number of segments
};

/// Splits an s_o-byte message into n segments of s_c bytes so that it is sent within L.
/// Throws InvalidConfig unless s_o >= 1, s_p >= 1, t_i > 0 and L >= t_i.
SegmentPlan segment_plan(int s_o, int s_p, double t_i, double L);

std::pair<DefendedTrace, DefenseReport> apply_padding_defense(const Trace &trace, const PaddingConfig &cfg);

/// Each direction becomes an independent stream with one packet per t_i slot starting at t = 0.
/// A slot carries the next pending segment of the FIFO queue, else a dummy of s_p bytes.
std::pair<DefendedTrace, DefenseReport> apply_modulation_defense(const Trace &trace, const ModulationConfig &cfg);

std::pair<DefendedTrace, DefenseReport> apply_defense(const Trace &trace, const DefenseConfig &cfg);

/// (defended bytes - original bytes) / original bytes; 0 for an empty original.
double bandwidth_overhead(const Trace &original, const DefendedTrace &defended);

nlohmann::json provenance_json(const DefendedTrace &defended);
nlohmann::json to_json(const DefenseReport &report);

} // namespace robofp

#endif // ROBOFP_DEFENSES_HPP
