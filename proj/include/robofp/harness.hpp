// harness.hpp
//
// Experiment orchestration: attack evaluation, threshold sweeps, defense sweeps and
// the report/CSV outputs behind the command-line tool.

#ifndef ROBOFP_HARNESS_HPP
#define ROBOFP_HARNESS_HPP

#include <exception>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "robofp/classifier.hpp"
#include "robofp/defenses.hpp"
#include "robofp/features.hpp"
#include "robofp/synth.hpp"

namespace robofp {

struct ExperimentConfig {
    /// generate from `gen` unless a manifest is given
    std::optional<std::filesystem::path> manifest;
    GenConfig gen;
    SigprocConfig sigproc;
    /// null: kernels are built from the generator templates
    std::optional<std::filesystem::path> kernel_bank;
    int kernel_sample = 0;
    GbdtParams classifier;
    int folds = 10;
    FeatureSet feature_set = FeatureSet::Full;
    std::vector<DefenseConfig> defenses;
    bool defense_retrain = true;
    std::vector<double> thresholds;
    std::filesystem::path out_dir = "out";

    /// sets the generator and classifier seeds
    void set_seed(std::uint64_t seed);
};

nlohmann::json to_json(const ExperimentConfig &cfg);
ExperimentConfig experiment_config_from_json(const nlohmann::json &j);
ExperimentConfig load_experiment_config(const std::filesystem::path &path);

/// FNV-1a of the config JSON without its output directory.
std::string config_fingerprint(const ExperimentConfig &cfg);

/// Wraps a failure with the experiment step and config fingerprint; cause() holds the original.
class HarnessError : public std::runtime_error {
public:
    HarnessError(const std::string &context, std::exception_ptr cause);
    std::exception_ptr cause() const { return cause_; }

private:
    std::exception_ptr cause_;
};

/// t = 0, 0.1, ..., 1.3
std::vector<double> default_threshold_grid();
/// padding x = 1..10
std::vector<DefenseConfig> padding_sweep_defenses();
/// every preset rate x s_p in {100, 200, ..., 1000}
std::vector<DefenseConfig> modulation_sweep_defenses();

Dataset load_experiment_dataset(const ExperimentConfig &cfg);
KernelBank load_experiment_kernels(const ExperimentConfig &cfg);

struct DefenseResult {
    DefenseConfig config;
    DefenseReport report;   ///< overhead and mean latency averaged, max latency maximized, totals summed
    CVReport cv;
};

struct ThresholdPoint {
    double threshold = 0.0;
    double accuracy = 0.0;
    std::vector<std::size_t> cluster_counts;   ///< Cartesian clusters per trace
};

struct ExperimentReport {
    ExperimentConfig config;
    std::string fingerprint;
    FeatureSchema schema;
    std::optional<CVReport> cv;
    ImportanceReport importance;
    std::vector<DefenseResult> defenses;
    std::vector<ThresholdPoint> threshold_sweep;
    std::vector<std::string> trace_ids;
};

/// Featurize, cross-validate, and rank features of a model trained on all traces (top 20).
ExperimentReport run_attack_experiment(const ExperimentConfig &cfg);

/// One attack run per Cartesian convolution threshold.
std::vector<ThresholdPoint> threshold_sweep(const ExperimentConfig &cfg, const std::vector<double> &thresholds);

/// Defends every trace, re-featurizes and re-runs CV with the same folds.
std::vector<DefenseResult> run_defense_sweep(const ExperimentConfig &cfg, const std::vector<DefenseConfig> &defenses);

/// Attack, then the configured threshold sweep and defenses.
ExperimentReport run_full_experiment(const ExperimentConfig &cfg);

/// `generated_at` is the only field that differs between identical runs; the embedded
/// config omits out_dir.
nlohmann::json to_json(const ExperimentReport &report, const std::string &generated_at);
std::string utc_timestamp();

/// Writes report.json and every figure CSV the report has data for.
void write_report_files(const nlohmann::json &report, const std::filesystem::path &out_dir);

/// Figure CSVs derived from a report JSON, keyed by file name.
std::vector<std::pair<std::string, std::string>> report_csvs(const nlohmann::json &report);

/// Human-readable summary of a report JSON.
std::string summary_table(const nlohmann::json &report);

} // namespace robofp

#endif // ROBOFP_HARNESS_HPP
