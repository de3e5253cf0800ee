// features.hpp
//
// Per-trace feature vectors: cluster statistics for each command kind followed by
// generic volume/timing summary statistics, under a versioned schema.

#ifndef ROBOFP_FEATURES_HPP
#define ROBOFP_FEATURES_HPP

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "robofp/sigproc.hpp"
#include "robofp/synth.hpp"
#include "robofp/trace.hpp"

namespace robofp {

inline constexpr const char *kFeatureSchemaVersion = "robofp-features-v1";

struct SigprocConfig {
    double bin_width = kDefaultBinWidth;
    double cartesian_threshold = 0.9;
    double gripper_position_threshold = 0.5;
    double gripper_speed_threshold = 0.6;
    double convolution_min_duration = 0.0;
    double correlation_min_duration = 1.0;
    double merge_gap = 0.2;

    double threshold(CommandKind kind) const;
};

nlohmann::json to_json(const SigprocConfig &cfg);
SigprocConfig sigproc_config_from_json(const nlohmann::json &j);

enum class FeatureSet { Full, SummaryOnly };

struct FeatureSchema {
    std::vector<std::string> names;
    std::string version = kFeatureSchemaVersion;
    std::string fingerprint;

    std::size_t size() const { return names.size(); }
};

struct FeatureVector {
    std::vector<double> values;
    std::string trace_id;
    std::optional<ActionLabel> label;
};

using NamedValues = std::vector<std::pair<std::string, double>>;

class FeatureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Volume and timing statistics; inter-arrival percentiles of a direction with
/// fewer than two packets are 0. Throws FeatureError on an empty trace.
NamedValues summary_features(const Trace &trace);

/// Cluster statistics per command kind, named `<kind>_<stat>`. Cartesian and gripper
/// position use convolution, gripper speed uses sliding correlation.
NamedValues command_features(const Trace &trace, const KernelBank &kernels, const SigprocConfig &cfg);

/// Names of command_features then summary_features for the requested set.
std::vector<std::string> feature_names(FeatureSet set = FeatureSet::Full);

FeatureSchema make_schema(const KernelBank &kernels, const SigprocConfig &cfg, FeatureSet set = FeatureSet::Full);

FeatureVector featurize(const Trace &trace, const KernelBank &kernels, const SigprocConfig &cfg,
                        FeatureSet set = FeatureSet::Full);

struct FeatureMatrix {
    FeatureSchema schema;
    std::vector<FeatureVector> rows;
};

/// Featurizes every trace (in parallel, order preserved).
FeatureMatrix featurize_dataset(const Dataset &dataset, const KernelBank &kernels, const SigprocConfig &cfg,
                                FeatureSet set = FeatureSet::Full);

std::string write_feature_csv(const FeatureMatrix &matrix);
FeatureMatrix parse_feature_csv(std::string_view text);
nlohmann::json to_json(const FeatureSchema &schema);
FeatureSchema feature_schema_from_json(const nlohmann::json &j);

/// Kernels cut from clean, keep-alive-free command bursts rendered from the generator
/// templates. Sample 0 uses each template's mid-range sizes with no jitter; other
/// samples draw sizes, timing and bin phase at random.
KernelBank build_kernel_bank(const GenConfig &gen, double bin_width = kDefaultBinWidth, int sample = 0);

} // namespace robofp

#endif // ROBOFP_FEATURES_HPP
