#include "robofp/features.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>

#include "robofp/parallel.hpp"
#include "robofp/stats.hpp"

namespace robofp {

namespace {

constexpr std::array<double, 8> kIatPercentiles = {5, 10, 20, 25, 50, 75, 90, 95};

constexpr std::array<const char *, 14> kStatNames = {
    "mean", "std", "median", "p25", "p75", "max", "min", "skewness", "kurtosis",
    "cluster_count", "total_cluster_length", "avg_cluster_length", "total_time_span", "avg_time_gap"};

std::array<double, 14> flatten(const CommandStats &s) {
    return {s.mean, s.std, s.median, s.p25, s.p75, s.max, s.min, s.skewness, s.kurtosis,
            static_cast<double>(s.cluster_count), s.total_cluster_length, s.avg_cluster_length,
            s.total_time_span, s.avg_time_gap};
}

struct DirectionStats {
    double count = 0;
    double bytes = 0;
    std::vector<double> iats;
    std::vector<double> sizes;
};

std::string_view trim_cr(std::string_view s) {
    if (!s.empty() && s.back() == '\r') {
        s.remove_suffix(1);
    }
    return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        auto next = line.find(sep, pos);
        if (next == std::string_view::npos) {
            out.push_back(line.substr(pos));
            return out;
        }
        out.push_back(line.substr(pos, next - pos));
        pos = next + 1;
    }
}

} // namespace

double SigprocConfig::threshold(CommandKind kind) const {
    switch (kind) {
    case CommandKind::CartesianMove: return cartesian_threshold;
    case CommandKind::GripperPosition: return gripper_position_threshold;
    case CommandKind::GripperSpeed: return gripper_speed_threshold;
    }
    return cartesian_threshold;
}

nlohmann::json to_json(const SigprocConfig &cfg) {
    return {
        {"bin_width", cfg.bin_width},
        {"cartesian_threshold", cfg.cartesian_threshold},
        {"gripper_position_threshold", cfg.gripper_position_threshold},
        {"gripper_speed_threshold", cfg.gripper_speed_threshold},
        {"convolution_min_duration", cfg.convolution_min_duration},
        {"correlation_min_duration", cfg.correlation_min_duration},
        {"merge_gap", cfg.merge_gap},
        // signals are time-binned, not indexed by packet
        {"time_axis", "binned"},
    };
}

SigprocConfig sigproc_config_from_json(const nlohmann::json &j) {
    SigprocConfig cfg;
    cfg.bin_width = j.value("bin_width", cfg.bin_width);
    cfg.cartesian_threshold = j.value("cartesian_threshold", cfg.cartesian_threshold);
    cfg.gripper_position_threshold = j.value("gripper_position_threshold", cfg.gripper_position_threshold);
    cfg.gripper_speed_threshold = j.value("gripper_speed_threshold", cfg.gripper_speed_threshold);
    cfg.convolution_min_duration = j.value("convolution_min_duration", cfg.convolution_min_duration);
    cfg.correlation_min_duration = j.value("correlation_min_duration", cfg.correlation_min_duration);
    cfg.merge_gap = j.value("merge_gap", cfg.merge_gap);
    if (!(cfg.bin_width > 0.0) || cfg.merge_gap < 0.0 || cfg.convolution_min_duration < 0.0 ||
        cfg.correlation_min_duration < 0.0) {
        throw std::invalid_argument{"invalid sigproc config"};
    }
    return cfg;
}

NamedValues summary_features(const Trace &trace) {
    if (trace.packets.empty()) {
        throw FeatureError{"EmptyTrace: cannot summarize '" + trace.trace_id + "'"};
    }
    DirectionStats in, out;
    double last_in = -1.0, last_out = -1.0;
    for (const auto &p : trace.packets) {
        const bool outgoing = p.dir == kOutgoing;
        auto &d = outgoing ? out : in;
        double &last = outgoing ? last_out : last_in;
        d.count += 1;
        d.bytes += p.size;
        d.sizes.push_back(p.size);
        if (last >= 0.0) {
            d.iats.push_back(p.t - last);
        }
        last = p.t;
    }
    const double duration = trace.packets.back().t - trace.packets.front().t;
    const double total = in.count + out.count;

    NamedValues f;
    f.reserve(30);
    f.emplace_back("count_total", total);
    f.emplace_back("count_in", in.count);
    f.emplace_back("count_out", out.count);
    f.emplace_back("frac_out", out.count / total);
    f.emplace_back("bytes_in", in.bytes);
    f.emplace_back("bytes_out", out.bytes);
    f.emplace_back("duration", duration);
    f.emplace_back("pkts_per_sec", duration > 0.0 ? total / duration : 0.0);
    for (auto *d : {&in, &out}) {
        const std::string prefix = d == &in ? "in_" : "out_";
        std::sort(d->iats.begin(), d->iats.end());
        f.emplace_back(prefix + "iat_mean", moments(d->iats).mean);
        for (double q : kIatPercentiles) {
            f.emplace_back(prefix + "iat_p" + std::to_string(static_cast<int>(q)), percentile_sorted(d->iats, q));
        }
    }
    for (auto *d : {&in, &out}) {
        const std::string prefix = d == &in ? "in_" : "out_";
        const Moments m = moments(d->sizes);
        f.emplace_back(prefix + "size_mean", m.mean);
        f.emplace_back(prefix + "size_std", m.std);
    }
    return f;
}

NamedValues command_features(const Trace &trace, const KernelBank &kernels, const SigprocConfig &cfg) {
    const Signal signal = bin_trace(trace, cfg.bin_width, BinMode::Signed);
    NamedValues f;
    f.reserve(kNumCommandKinds * kStatNames.size());
    for (auto kind : kAllCommandKinds) {
        const Kernel *kernel = find_kernel(kernels, kind);
        if (kernel == nullptr) {
            throw FeatureError{"MissingKernel: no kernel for " + std::string{to_string(kind)}};
        }
        if (std::abs(kernel->bin_width - cfg.bin_width) > 1e-12) {
            throw FeatureError{"kernel bin width does not match the sigproc bin width for " +
                               std::string{to_string(kind)}};
        }
        const bool correlation = kind == CommandKind::GripperSpeed;
        const Signal processed = correlation ? sliding_correlation(signal, *kernel) : convolve(signal, *kernel);
        const double min_duration = correlation ? cfg.correlation_min_duration : cfg.convolution_min_duration;
        const ClusterSet clusters = detect_clusters(processed, cfg.threshold(kind), min_duration, cfg.merge_gap);
        const auto values = flatten(cluster_statistics(clusters, processed));
        for (std::size_t i = 0; i < kStatNames.size(); ++i) {
            f.emplace_back(std::string{feature_prefix(kind)} + "_" + kStatNames[i], values[i]);
        }
    }
    return f;
}

std::vector<std::string> feature_names(FeatureSet set) {
    std::vector<std::string> names;
    if (set == FeatureSet::Full) {
        for (auto kind : kAllCommandKinds) {
            for (const char *stat : kStatNames) {
                names.push_back(std::string{feature_prefix(kind)} + "_" + stat);
            }
        }
    }
    Trace probe;
    probe.packets = {{0.0, kOutgoing, 1}};
    for (auto &[name, value] : summary_features(probe)) {
        names.push_back(name);
    }
    return names;
}

FeatureSchema make_schema(const KernelBank &kernels, const SigprocConfig &cfg, FeatureSet set) {
    FeatureSchema schema;
    schema.names = feature_names(set);
    nlohmann::json id = {
        {"version", schema.version},
        {"set", set == FeatureSet::Full ? "full" : "summary_only"},
        {"sigproc", to_json(cfg)},
        {"kernel_bank", set == FeatureSet::Full ? kernel_bank_hash(kernels) : std::string{}},
    };
    schema.fingerprint = fnv1a_hex(id.dump());
    return schema;
}

FeatureVector featurize(const Trace &trace, const KernelBank &kernels, const SigprocConfig &cfg, FeatureSet set) {
    FeatureVector v;
    v.trace_id = trace.trace_id;
    v.label = trace.label;
    if (set == FeatureSet::Full) {
        for (auto &[name, value] : command_features(trace, kernels, cfg)) {
            v.values.push_back(value);
        }
    }
    for (auto &[name, value] : summary_features(trace)) {
        v.values.push_back(value);
    }
    for (double &x : v.values) {
        if (!std::isfinite(x)) {
            x = 0.0;
        }
    }
    return v;
}

FeatureMatrix featurize_dataset(const Dataset &dataset, const KernelBank &kernels, const SigprocConfig &cfg,
                                FeatureSet set) {
    FeatureMatrix m;
    m.schema = make_schema(kernels, cfg, set);
    m.rows.resize(dataset.traces.size());
    parallel_for(dataset.traces.size(),
                 [&](std::size_t i) { m.rows[i] = featurize(dataset.traces[i], kernels, cfg, set); });
    return m;
}

std::string write_feature_csv(const FeatureMatrix &matrix) {
    std::string out = "trace_id,label";
    for (const auto &name : matrix.schema.names) {
        out += ',';
        out += name;
    }
    out += '\n';
    for (const auto &row : matrix.rows) {
        out += row.trace_id;
        out += ',';
        if (row.label) {
            out += to_string(*row.label);
        }
        for (double v : row.values) {
            out += ',';
            out += format_number(v);
        }
        out += '\n';
    }
    return out;
}

FeatureMatrix parse_feature_csv(std::string_view text) {
    FeatureMatrix m;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        auto line = trim_cr(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        ++line_no;
        auto fields = split(line, ',');
        if (line_no == 1) {
            if (fields.size() < 2 || fields[0] != "trace_id" || fields[1] != "label") {
                throw FeatureError{"feature CSV header must start with 'trace_id,label'"};
            }
            for (std::size_t i = 2; i < fields.size(); ++i) {
                m.schema.names.emplace_back(fields[i]);
            }
            continue;
        }
        if (line.empty()) {
            continue;
        }
        if (fields.size() != m.schema.names.size() + 2) {
            throw FeatureError{"feature CSV line " + std::to_string(line_no) + " has the wrong field count"};
        }
        FeatureVector v;
        v.trace_id = std::string{fields[0]};
        if (!fields[1].empty()) {
            v.label = parse_action_label(fields[1]);
            if (!v.label) {
                throw FeatureError{"UnknownLabel '" + std::string{fields[1]} + "' on line " + std::to_string(line_no)};
            }
        }
        for (std::size_t i = 2; i < fields.size(); ++i) {
            double x = 0.0;
            auto [ptr, ec] = std::from_chars(fields[i].data(), fields[i].data() + fields[i].size(), x);
            if (ec != std::errc{} || ptr != fields[i].data() + fields[i].size()) {
                throw FeatureError{"bad number on feature CSV line " + std::to_string(line_no)};
            }
            v.values.push_back(x);
        }
        m.rows.push_back(std::move(v));
    }
    return m;
}

nlohmann::json to_json(const FeatureSchema &schema) {
    return {{"version", schema.version}, {"fingerprint", schema.fingerprint}, {"names", schema.names}};
}

FeatureSchema feature_schema_from_json(const nlohmann::json &j) {
    FeatureSchema s;
    s.version = j.at("version").get<std::string>();
    s.fingerprint = j.at("fingerprint").get<std::string>();
    s.names = j.at("names").get<std::vector<std::string>>();
    return s;
}

KernelBank build_kernel_bank(const GenConfig &gen, double bin_width, int sample) {
    KernelBank bank;
    Rng rng{derive_seed(gen.seed, 1000, static_cast<std::uint64_t>(sample))};
    for (auto kind : kAllCommandKinds) {
        CommandTemplate tmpl = gen.command(kind);
        double duration = 0.5 * (tmpl.duration.lo + tmpl.duration.hi);
        // start off the bin edges so fixed delays land on whole-bin offsets
        double phase = 0.37;
        if (sample == 0) {
            auto mid = [](SizeRange r) { return (r.lo + r.hi) / 2; };
            tmpl.out_size = {mid(tmpl.out_size), mid(tmpl.out_size)};
            if (tmpl.feedback_size.hi > 0) {
                tmpl.feedback_size = {mid(tmpl.feedback_size), mid(tmpl.feedback_size)};
            }
            tmpl.jitter = 0.0;
        } else {
            duration = rng.uniform(tmpl.duration.lo, tmpl.duration.hi);
            phase = rng.uniform(0.05, 0.95);
        }
        const double window_start = 10.0 * bin_width;
        const double start = window_start + phase * bin_width;
        Trace burst;
        burst.trace_id = std::string{"template:"} + std::string{to_string(kind)} + "#" + std::to_string(sample);
        burst.packets = gen_command(tmpl, start, duration, rng);

        double window_end = burst.packets.back().t + bin_width;
        if (kind == CommandKind::GripperSpeed) {
            // a short stretch of the steady-rate stream
            window_end = window_start + 0.25;
        }
        Kernel k = extract_kernel(burst, window_start, window_end, kind, bin_width);
        k.source_id = burst.trace_id;
        bank.push_back(std::move(k));
    }
    return bank;
}

} // namespace robofp
