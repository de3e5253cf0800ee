#include "robofp/sigproc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "robofp/stats.hpp"

namespace robofp {

namespace {

constexpr double kTimeEps = 1e-9;

double squared_norm(const std::vector<double> &v) {
    double s = 0.0;
    for (double x : v) {
        s += x * x;
    }
    return s;
}

bool is_constant(const double *first, std::size_t n) {
    for (std::size_t i = 1; i < n; ++i) {
        if (first[i] != first[0]) {
            return false;
        }
    }
    return true;
}

} // namespace

SigprocError::SigprocError(SigprocErrorKind kind, const std::string &detail)
    : std::runtime_error{detail}, kind_{kind} {}

double Kernel::norm() const { return std::sqrt(squared_norm(values)); }

Signal bin_trace(const Trace &trace, double bin_width, BinMode mode) {
    if (!(bin_width > 0.0)) {
        throw SigprocError{SigprocErrorKind::InvalidArgument, "bin_width must be positive"};
    }
    Signal s;
    s.bin_width = bin_width;
    if (trace.packets.empty()) {
        s.values.assign(1, 0.0);
        return s;
    }
    const double origin = trace.packets.front().t;
    const double duration = trace.packets.back().t - origin;
    const auto len = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(duration / bin_width)));
    s.values.assign(len, 0.0);
    for (const auto &p : trace.packets) {
        if ((mode == BinMode::OutgoingOnly && p.dir != kOutgoing) ||
            (mode == BinMode::IncomingOnly && p.dir != kIncoming)) {
            continue;
        }
        auto idx = static_cast<std::size_t>(std::floor((p.t - origin) / bin_width));
        idx = std::min(idx, len - 1);
        s.values[idx] += static_cast<double>(p.dir * p.size);
    }
    return s;
}

Signal convolve(const Signal &signal, const Kernel &kernel) {
    if (kernel.values.empty()) {
        throw SigprocError{SigprocErrorKind::EmptyKernel, "convolution kernel is empty"};
    }
    const double energy = squared_norm(kernel.values);
    if (!(energy > 0.0)) {
        throw SigprocError{SigprocErrorKind::EmptyKernel, "convolution kernel has zero norm"};
    }
    const auto n = static_cast<std::ptrdiff_t>(signal.values.size());
    const auto k = static_cast<std::ptrdiff_t>(kernel.values.size());
    const std::ptrdiff_t offset = (k - 1) - (k - 1) / 2;

    Signal out;
    out.bin_width = signal.bin_width;
    out.t0 = signal.t0;
    out.values.assign(signal.values.size(), 0.0);
    const double *x = signal.values.data();
    const double *h = kernel.values.data();
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const std::ptrdiff_t base = i - offset;
        const std::ptrdiff_t j0 = std::max<std::ptrdiff_t>(0, -base);
        const std::ptrdiff_t j1 = std::min<std::ptrdiff_t>(k, n - base);
        double acc = 0.0;
        for (std::ptrdiff_t j = j0; j < j1; ++j) {
            acc += x[base + j] * h[j];
        }
        out.values[static_cast<std::size_t>(i)] = acc / energy;
    }
    return out;
}

Signal sliding_correlation(const Signal &signal, const Kernel &kernel) {
    if (kernel.values.size() < 2) {
        throw SigprocError{SigprocErrorKind::KernelTooShort, "correlation kernel needs at least 2 bins"};
    }
    const std::size_t n = signal.values.size();
    const std::size_t k = kernel.values.size();

    Signal out;
    out.bin_width = signal.bin_width;
    out.t0 = signal.t0;
    if (n < k) {
        return out;
    }
    out.values.assign(n - k + 1, 0.0);
    if (is_constant(kernel.values.data(), k)) {
        return out;
    }

    double hmean = 0.0;
    for (double v : kernel.values) {
        hmean += v;
    }
    hmean /= static_cast<double>(k);
    std::vector<double> hc(k);
    double hss = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        hc[j] = kernel.values[j] - hmean;
        hss += hc[j] * hc[j];
    }

    const double *x = signal.values.data();
    for (std::size_t m = 0; m + k <= n; ++m) {
        const double *w = x + m;
        if (is_constant(w, k)) {
            continue;
        }
        double wmean = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            wmean += w[j];
        }
        wmean /= static_cast<double>(k);
        double cov = 0.0, wss = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            const double d = w[j] - wmean;
            cov += d * hc[j];
            wss += d * d;
        }
        const double r = cov / std::sqrt(wss * hss);
        out.values[m] = std::clamp(r, -1.0, 1.0);
    }
    return out;
}

ClusterSet detect_clusters(const Signal &processed, double threshold, double min_duration, double merge_gap) {
    if (min_duration < 0.0 || merge_gap < 0.0) {
        throw SigprocError{SigprocErrorKind::InvalidArgument, "min_duration and merge_gap must be non-negative"};
    }
    ClusterSet set;
    set.threshold_used = threshold;

    std::vector<Cluster> runs;
    const auto &v = processed.values;
    std::size_t i = 0;
    while (i < v.size()) {
        if (!(v[i] > threshold)) {
            ++i;
            continue;
        }
        std::size_t j = i;
        double peak = v[i];
        while (j < v.size() && v[j] > threshold) {
            peak = std::max(peak, v[j]);
            ++j;
        }
        runs.push_back({processed.time_at(i), processed.time_at(j), peak});
        i = j;
    }

    std::vector<Cluster> merged;
    for (const auto &run : runs) {
        if (!merged.empty() && run.start - merged.back().end < merge_gap) {
            merged.back().end = run.end;
            merged.back().peak_value = std::max(merged.back().peak_value, run.peak_value);
        } else {
            merged.push_back(run);
        }
    }
    for (const auto &c : merged) {
        if (c.length() + kTimeEps >= min_duration) {
            set.clusters.push_back(c);
        }
    }
    return set;
}

CommandStats cluster_statistics(const ClusterSet &clusters, const Signal &processed) {
    CommandStats st;
    const auto &v = processed.values;
    if (!v.empty()) {
        const Moments m = moments(v);
        std::vector<double> sorted(v.begin(), v.end());
        std::sort(sorted.begin(), sorted.end());
        st.mean = m.mean;
        st.std = m.std;
        st.skewness = m.skewness;
        st.kurtosis = m.kurtosis;
        st.median = percentile_sorted(sorted, 50.0);
        st.p25 = percentile_sorted(sorted, 25.0);
        st.p75 = percentile_sorted(sorted, 75.0);
        st.min = sorted.front();
        st.max = sorted.back();
    }

    const auto &c = clusters.clusters;
    st.cluster_count = c.size();
    if (c.empty()) {
        return st;
    }
    for (const auto &cl : c) {
        st.total_cluster_length += cl.length();
    }
    st.avg_cluster_length = st.total_cluster_length / static_cast<double>(c.size());
    st.total_time_span = c.back().end - c.front().start;
    if (c.size() >= 2) {
        st.avg_time_gap = (c.back().start - c.front().start) / static_cast<double>(c.size() - 1);
    }
    return st;
}

Kernel extract_kernel(const Trace &trace, double start, double end, CommandKind kind, double bin_width) {
    if (!(bin_width > 0.0) || !(end > start)) {
        throw SigprocError{SigprocErrorKind::InvalidArgument, "kernel window must have end > start"};
    }
    const auto len = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((end - start) / bin_width)));
    Kernel kernel;
    kernel.kind = kind;
    kernel.bin_width = bin_width;
    kernel.source_id = trace.trace_id;
    kernel.values.assign(len, 0.0);
    std::size_t hits = 0;
    for (const auto &p : trace.packets) {
        if (p.t < start || p.t >= end) {
            continue;
        }
        auto idx = std::min(len - 1, static_cast<std::size_t>(std::floor((p.t - start) / bin_width)));
        kernel.values[idx] += static_cast<double>(p.dir * p.size);
        ++hits;
    }
    if (hits == 0) {
        throw SigprocError{SigprocErrorKind::EmptyWindow, "no packets in kernel window"};
    }
    if (!(kernel.norm() > 0.0)) {
        throw SigprocError{SigprocErrorKind::EmptyWindow, "kernel window cancels to zero"};
    }
    return kernel;
}

const Kernel *find_kernel(const KernelBank &bank, CommandKind kind) {
    for (const auto &k : bank) {
        if (k.kind == kind) {
            return &k;
        }
    }
    return nullptr;
}

nlohmann::json to_json(const KernelBank &bank) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto &k : bank) {
        arr.push_back({
            {"kind", std::string{to_string(k.kind)}},
            {"bin_width", k.bin_width},
            {"values", k.values},
            {"source_id", k.source_id},
        });
    }
    return arr;
}

KernelBank kernel_bank_from_json(const nlohmann::json &j) {
    if (!j.is_array()) {
        throw SigprocError{SigprocErrorKind::InvalidArgument, "kernel bank must be a JSON array"};
    }
    KernelBank bank;
    for (const auto &e : j) {
        Kernel k;
        auto kind = parse_command_kind(e.at("kind").get<std::string>());
        if (!kind) {
            throw SigprocError{SigprocErrorKind::InvalidArgument, "unknown kernel kind " + e.at("kind").dump()};
        }
        k.kind = *kind;
        k.bin_width = e.at("bin_width").get<double>();
        k.values = e.at("values").get<std::vector<double>>();
        k.source_id = e.value("source_id", std::string{});
        if (k.values.empty() || !(k.norm() > 0.0)) {
            throw SigprocError{SigprocErrorKind::EmptyKernel, "kernel '" + k.source_id + "' is empty"};
        }
        bank.push_back(std::move(k));
    }
    return bank;
}

void write_kernel_bank(const std::filesystem::path &path, const KernelBank &bank) {
    write_text_file(path, to_json(bank).dump(2) + "\n");
}

KernelBank read_kernel_bank(const std::filesystem::path &path) {
    return kernel_bank_from_json(nlohmann::json::parse(read_text_file(path)));
}

std::string fnv1a_hex(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string kernel_bank_hash(const KernelBank &bank) { return fnv1a_hex(to_json(bank).dump()); }

} // namespace robofp
