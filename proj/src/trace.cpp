#include "robofp/trace.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace robofp {

namespace {

constexpr std::string_view kTraceHeader = "t,dir,size";
constexpr std::string_view kManifestHeader = "path,label";

constexpr std::array<std::string_view, kNumActions> kActionNames = {
    "PickAndPlace", "PourWater", "TurnOnSwitch", "PressKey"};

/// splits text into lines on '\n'; a single trailing newline does not produce an extra line
std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            lines.push_back(text.substr(pos));
            break;
        }
        std::string_view line = text.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        lines.push_back(line);
        pos = nl + 1;
    }
    return lines;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (true) {
        std::size_t comma = line.find(',', pos);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(pos));
            return fields;
        }
        fields.push_back(line.substr(pos, comma - pos));
        pos = comma + 1;
    }
}

template <typename T>
bool parse_number(std::string_view field, T &out) {
    if (field.empty()) {
        return false;
    }
    const char *first = field.data();
    const char *last = field.data() + field.size();
    if (*first == '+') {
        ++first;
    }
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

} // namespace

std::string_view to_string(ActionLabel label) { return kActionNames.at(index_of(label)); }

std::optional<ActionLabel> parse_action_label(std::string_view name) {
    for (std::size_t i = 0; i < kNumActions; ++i) {
        if (kActionNames[i] == name) {
            return kAllActions[i];
        }
    }
    return std::nullopt;
}

std::array<std::size_t, kNumActions> Dataset::class_counts() const {
    std::array<std::size_t, kNumActions> counts{};
    for (const auto &trace : traces) {
        if (trace.label) {
            ++counts[index_of(*trace.label)];
        }
    }
    return counts;
}

std::string_view to_string(TraceErrorKind kind) {
    switch (kind) {
    case TraceErrorKind::MalformedHeader: return "MalformedHeader";
    case TraceErrorKind::MalformedRow: return "MalformedRow";
    case TraceErrorKind::NonMonotonicTime: return "NonMonotonicTime";
    case TraceErrorKind::BadDirection: return "BadDirection";
    case TraceErrorKind::SizeOutOfRange: return "SizeOutOfRange";
    case TraceErrorKind::UnknownLabel: return "UnknownLabel";
    case TraceErrorKind::MissingFile: return "MissingFile";
    case TraceErrorKind::EmptyDataset: return "EmptyDataset";
    case TraceErrorKind::Io: return "Io";
    }
    return "Unknown";
}

TraceError::TraceError(TraceErrorKind kind, std::size_t line, const std::string &detail)
    : std::runtime_error{std::string{to_string(kind)} + (line ? " at line " + std::to_string(line) : "") +
                         (detail.empty() ? "" : ": " + detail)},
      kind_{kind}, line_{line} {}

std::string format_number(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc{}) {
        throw std::runtime_error{"cannot format value"};
    }
    return {buf, ptr};
}

std::string format_fixed(double value, int min_decimals) {
    char buf[128];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed);
    if (ec != std::errc{}) {
        throw std::runtime_error{"cannot format value"};
    }
    std::string out{buf, ptr};
    auto dot = out.find('.');
    int decimals = 0;
    if (dot == std::string::npos) {
        out.push_back('.');
    } else {
        decimals = static_cast<int>(out.size() - dot - 1);
    }
    if (decimals < min_decimals) {
        out.append(static_cast<std::size_t>(min_decimals - decimals), '0');
    }
    return out;
}

Trace parse_trace_csv(std::string_view text, std::string trace_id) {
    auto lines = split_lines(text);
    if (lines.empty() || lines.front() != kTraceHeader) {
        throw TraceError{TraceErrorKind::MalformedHeader, 1, "expected '" + std::string{kTraceHeader} + "'"};
    }

    Trace trace;
    trace.trace_id = std::move(trace_id);
    trace.packets.reserve(lines.size() - 1);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::size_t line_no = i + 1;
        auto fields = split_fields(lines[i]);
        if (fields.size() != 3) {
            throw TraceError{TraceErrorKind::MalformedRow, line_no, "expected 3 fields"};
        }
        PacketRecord rec;
        if (!parse_number(fields[0], rec.t) || !std::isfinite(rec.t) || rec.t < 0.0 || fields[0].front() == '-') {
            throw TraceError{TraceErrorKind::MalformedRow, line_no, "bad timestamp '" + std::string{fields[0]} + "'"};
        }
        if (fields[1] == "1" || fields[1] == "+1") {
            rec.dir = kOutgoing;
        } else if (fields[1] == "-1") {
            rec.dir = kIncoming;
        } else {
            throw TraceError{TraceErrorKind::BadDirection, line_no, "'" + std::string{fields[1]} + "'"};
        }
        long long size = 0;
        if (!parse_number(fields[2], size)) {
            throw TraceError{TraceErrorKind::MalformedRow, line_no, "bad size '" + std::string{fields[2]} + "'"};
        }
        if (size < 1 || size > kMtu) {
            throw TraceError{TraceErrorKind::SizeOutOfRange, line_no, std::to_string(size)};
        }
        rec.size = static_cast<int>(size);
        if (!trace.packets.empty() && rec.t < trace.packets.back().t) {
            throw TraceError{TraceErrorKind::NonMonotonicTime, line_no, std::string{fields[0]}};
        }
        trace.packets.push_back(rec);
    }

    if (!trace.packets.empty() && trace.packets.front().t != 0.0) {
        const double t0 = trace.packets.front().t;
        for (auto &p : trace.packets) {
            p.t -= t0;
        }
    }
    return trace;
}

std::string write_trace_csv(const Trace &trace) {
    std::string out;
    out.reserve(16 + trace.packets.size() * 20);
    out.append(kTraceHeader);
    out.push_back('\n');
    for (const auto &p : trace.packets) {
        out.append(format_fixed(p.t));
        out.append(p.dir == kOutgoing ? ",1," : ",-1,");
        out.append(std::to_string(p.size));
        out.push_back('\n');
    }
    return out;
}

std::string read_text_file(const std::filesystem::path &path) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) {
        throw TraceError{TraceErrorKind::MissingFile, 0, path.string()};
    }
    std::ifstream in{path, std::ios::binary};
    if (!in) {
        throw TraceError{TraceErrorKind::Io, 0, "cannot open " + path.string()};
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path &path, std::string_view text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out{path, std::ios::binary | std::ios::trunc};
    if (!out) {
        throw TraceError{TraceErrorKind::Io, 0, "cannot write " + path.string()};
    }
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) {
        throw TraceError{TraceErrorKind::Io, 0, "write failed for " + path.string()};
    }
}

Trace read_trace_file(const std::filesystem::path &path) {
    return parse_trace_csv(read_text_file(path), path.stem().string());
}

void write_trace_file(const std::filesystem::path &path, const Trace &trace) {
    write_text_file(path, write_trace_csv(trace));
}

Dataset load_dataset(const std::filesystem::path &manifest) {
    const std::string text = read_text_file(manifest);
    auto lines = split_lines(text);
    if (lines.empty() || lines.front() != kManifestHeader) {
        throw TraceError{TraceErrorKind::MalformedHeader, 1, "expected '" + std::string{kManifestHeader} + "'"};
    }
    Dataset ds;
    ds.manifest_path = manifest;
    const auto base = manifest.parent_path();
    for (std::size_t i = 1; i < lines.size(); ++i) {
        auto fields = split_fields(lines[i]);
        if (fields.size() != 2 || fields[0].empty()) {
            throw TraceError{TraceErrorKind::MalformedRow, i + 1, "expected 'path,label'"};
        }
        auto label = parse_action_label(fields[1]);
        if (!label) {
            throw TraceError{TraceErrorKind::UnknownLabel, i + 1, std::string{fields[1]}};
        }
        const auto path = base / std::filesystem::path{std::string{fields[0]}};
        Trace trace;
        try {
            trace = read_trace_file(path);
        } catch (const TraceError &e) {
            if (e.kind() == TraceErrorKind::MissingFile) {
                throw TraceError{TraceErrorKind::MissingFile, i + 1, path.string()};
            }
            throw TraceError{e.kind(), e.line(), path.string() + ": " + e.what()};
        }
        trace.label = label;
        ds.traces.push_back(std::move(trace));
    }
    if (ds.traces.empty()) {
        throw TraceError{TraceErrorKind::EmptyDataset, 0, manifest.string()};
    }
    return ds;
}

void write_manifest(const std::filesystem::path &manifest,
                    const std::vector<std::pair<std::string, ActionLabel>> &rows) {
    std::string out{kManifestHeader};
    out.push_back('\n');
    for (const auto &[path, label] : rows) {
        out.append(path);
        out.push_back(',');
        out.append(to_string(label));
        out.push_back('\n');
    }
    write_text_file(manifest, out);
}

} // namespace robofp
