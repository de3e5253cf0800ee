// sigproc.hpp
//
// Time-binned traffic signals and the pattern-matching operations run on them:
// kernel-normalized convolution (one-shot commands), sliding Pearson correlation
// (recurring commands), cluster detection and the per-command cluster statistics.

#ifndef ROBOFP_SIGPROC_HPP
#define ROBOFP_SIGPROC_HPP

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "robofp/command.hpp"
#include "robofp/trace.hpp"

namespace robofp {

inline constexpr double kDefaultBinWidth = 0.01;

/// Uniformly binned series; bin i covers [t0 + i * bin_width, t0 + (i + 1) * bin_width).
struct Signal {
    std::vector<double> values;
    double bin_width = kDefaultBinWidth;
    double t0 = 0.0;

    double time_at(std::size_t i) const { return t0 + static_cast<double>(i) * bin_width; }
    std::size_t size() const { return values.size(); }
};

/// Reference signature of one command type, stored in traffic order.
struct Kernel {
    std::vector<double> values;
    CommandKind kind = CommandKind::CartesianMove;
    std::string source_id;
    double bin_width = kDefaultBinWidth;

    double norm() const;
};

using KernelBank = std::vector<Kernel>;

struct Cluster {
    double start = 0.0;
    double end = 0.0;
    double peak_value = 0.0;

    double length() const { return end - start; }
};

struct ClusterSet {
    std::vector<Cluster> clusters;
    double threshold_used = 0.0;
};

struct CommandStats {
    double mean = 0.0;
    double std = 0.0;
    double median = 0.0;
    double p25 = 0.0;
    double p75 = 0.0;
    double max = 0.0;
    double min = 0.0;
    double skewness = 0.0;
    double kurtosis = 0.0;
    std::size_t cluster_count = 0;
    double total_cluster_length = 0.0;
    double avg_cluster_length = 0.0;
    double total_time_span = 0.0;
    double avg_time_gap = 0.0;
};

enum class SigprocErrorKind { EmptyKernel, KernelTooShort, EmptyWindow, InvalidArgument };

class SigprocError : public std::runtime_error {
public:
    SigprocError(SigprocErrorKind kind, const std::string &detail);
    SigprocErrorKind kind() const noexcept { return kind_; }

private:
    SigprocErrorKind kind_;
};

enum class BinMode { Signed, OutgoingOnly, IncomingOnly };

/// Sums dir * size per bin from the first packet's timestamp;
/// length = ceil(duration / bin_width), at least 1.
Signal bin_trace(const Trace &trace, double bin_width = kDefaultBinWidth, BinMode mode = BinMode::Signed);

/// Matched-filter convolution: the signal is convolved with the time-reversed kernel,
/// both scaled by 1/||kernel||, with "same" alignment (output[n] is centered on
/// the kernel). A segment equal to the kernel scores exactly 1.
Signal convolve(const Signal &signal, const Kernel &kernel);

/// output[m] = Pearson r between the kernel and signal[m, m + K); zero-variance windows give 0.
/// The output has max(N - K + 1, 0) values and output[m] is stamped with the window start.
Signal sliding_correlation(const Signal &signal, const Kernel &kernel);

/// Maximal runs above `threshold`, merged across gaps shorter than `merge_gap`,
/// then runs shorter than `min_duration` dropped.
ClusterSet detect_clusters(const Signal &processed, double threshold, double min_duration, double merge_gap);

/// Moment statistics over the full processed signal plus cluster-derived timing.
/// avg_time_gap uses start-to-start spacing; total_time_span = last end - first start.
CommandStats cluster_statistics(const ClusterSet &clusters, const Signal &processed);

/// Bins the packets in [start, end) into a kernel.
Kernel extract_kernel(const Trace &trace, double start, double end, CommandKind kind,
                      double bin_width = kDefaultBinWidth);

const Kernel *find_kernel(const KernelBank &bank, CommandKind kind);

nlohmann::json to_json(const KernelBank &bank);
KernelBank kernel_bank_from_json(const nlohmann::json &j);
void write_kernel_bank(const std::filesystem::path &path, const KernelBank &bank);
KernelBank read_kernel_bank(const std::filesystem::path &path);

/// FNV-1a over the bank's JSON form; identifies a bank in feature fingerprints.
std::string kernel_bank_hash(const KernelBank &bank);

/// 64-bit FNV-1a rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view text);

} // namespace robofp

#endif // ROBOFP_SIGPROC_HPP
