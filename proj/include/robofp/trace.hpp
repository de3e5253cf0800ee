// trace.hpp
//
// Packet-metadata traces, action labels, labeled datasets and their CSV forms.

#ifndef ROBOFP_TRACE_HPP
#define ROBOFP_TRACE_HPP

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace robofp {

/// largest packet size accepted anywhere in the toolkit
inline constexpr int kMtu = 1500;

/// +1 = controller to robot (outgoing), -1 = robot to controller (incoming)
inline constexpr int kOutgoing = 1;
inline constexpr int kIncoming = -1;

struct PacketRecord {
    double t = 0.0;   ///< seconds since trace start
    int dir = kOutgoing;
    int size = 1;     ///< payload bytes, 1..kMtu

    bool operator==(const PacketRecord &) const = default;
};

enum class ActionLabel { PickAndPlace = 0, PourWater = 1, TurnOnSwitch = 2, PressKey = 3 };

inline constexpr std::size_t kNumActions = 4;
inline constexpr std::array<ActionLabel, kNumActions> kAllActions = {
    ActionLabel::PickAndPlace, ActionLabel::PourWater, ActionLabel::TurnOnSwitch, ActionLabel::PressKey};

std::string_view to_string(ActionLabel label);
std::optional<ActionLabel> parse_action_label(std::string_view name);
inline std::size_t index_of(ActionLabel label) { return static_cast<std::size_t>(label); }

struct Trace {
    std::vector<PacketRecord> packets;
    std::optional<ActionLabel> label;
    std::string trace_id;

    /// timestamp of the last packet (0 for an empty trace)
    double duration() const { return packets.empty() ? 0.0 : packets.back().t; }

    bool operator==(const Trace &) const = default;
};

struct Dataset {
    std::vector<Trace> traces;
    std::filesystem::path manifest_path;

    std::array<std::size_t, kNumActions> class_counts() const;
};

enum class TraceErrorKind {
    MalformedHeader,
    MalformedRow,
    NonMonotonicTime,
    BadDirection,
    SizeOutOfRange,
    UnknownLabel,
    MissingFile,
    EmptyDataset,
    Io,
};

std::string_view to_string(TraceErrorKind kind);

/// Parse and I/O failures. `line()` is the 1-based file line, 0 when not applicable.
class TraceError : public std::runtime_error {
public:
    TraceError(TraceErrorKind kind, std::size_t line, const std::string &detail);

    TraceErrorKind kind() const noexcept { return kind_; }
    std::size_t line() const noexcept { return line_; }

private:
    TraceErrorKind kind_;
    std::size_t line_;
};

/// Parses `t,dir,size` CSV. Timestamps are shifted so the first packet sits at t = 0.
Trace parse_trace_csv(std::string_view text, std::string trace_id = {});

/// Renders a trace in the canonical CSV form. Timestamps use fixed notation with
/// at least six decimals and enough digits to read back to the same double.
std::string write_trace_csv(const Trace &trace);

Trace read_trace_file(const std::filesystem::path &path);
void write_trace_file(const std::filesystem::path &path, const Trace &trace);

/// Loads a `path,label` manifest; paths are relative to the manifest's directory.
Dataset load_dataset(const std::filesystem::path &manifest);

/// Writes `path,label` rows for already-written trace files (paths relative to the manifest).
void write_manifest(const std::filesystem::path &manifest,
                    const std::vector<std::pair<std::string, ActionLabel>> &rows);

/// Reads a whole file into a string, throwing TraceError{Io|MissingFile}.
std::string read_text_file(const std::filesystem::path &path);
void write_text_file(const std::filesystem::path &path, std::string_view text);

/// Shortest round-trip fixed-notation rendering, padded to `min_decimals`.
std::string format_fixed(double value, int min_decimals = 6);

/// Shortest round-trip rendering (general notation).
std::string format_number(double value);

} // namespace robofp

#endif // ROBOFP_TRACE_HPP
