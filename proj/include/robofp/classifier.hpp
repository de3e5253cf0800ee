// classifier.hpp
//
// Softmax gradient-boosted trees with exact greedy splits, stratified k-fold
// cross-validation and gain-based feature importance.

#ifndef ROBOFP_CLASSIFIER_HPP
#define ROBOFP_CLASSIFIER_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "robofp/features.hpp"
#include "robofp/trace.hpp"

namespace robofp {

struct GbdtParams {
    int rounds = 100;
    int max_depth = 6;
    double eta = 0.3;
    double lambda = 1.0;
    double gamma = 0.0;
    double min_child_weight = 1.0;
    double base_score = 0.5;
    std::uint64_t seed = 42;
};

nlohmann::json to_json(const GbdtParams &p);
GbdtParams gbdt_params_from_json(const nlohmann::json &j);

enum class ClassifierErrorKind { SingleClass, SchemaMismatch, TooFewSamples, MissingLabel, InvalidArgument };

class ClassifierError : public std::runtime_error {
public:
    ClassifierError(ClassifierErrorKind kind, const std::string &detail);
    ClassifierErrorKind kind() const noexcept { return kind_; }

private:
    ClassifierErrorKind kind_;
};

/// Flat node array; a node with feature < 0 is a leaf. Samples with x[feature] < threshold go left.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
    double gain = 0.0;
};

struct Tree {
    std::vector<TreeNode> nodes;

    double predict(std::span<const double> x) const;
};

struct Prediction {
    ActionLabel label = ActionLabel::PickAndPlace;
    std::array<double, kNumActions> scores{};
};

class Model {
public:
    Model() = default;

    const GbdtParams &params() const { return params_; }
    const FeatureSchema &schema() const { return schema_; }
    /// trees[round * kNumActions + class]
    const std::vector<Tree> &trees() const { return trees_; }

    /// Throws SchemaMismatch when the fingerprint or vector length differs from training.
    Prediction predict(std::span<const double> values, std::string_view fingerprint) const;
    Prediction predict(const FeatureVector &v, const FeatureSchema &schema) const;

    nlohmann::json to_json() const;
    static Model from_json(const nlohmann::json &j);

    friend Model train(const FeatureMatrix &, const GbdtParams &);

private:
    GbdtParams params_;
    FeatureSchema schema_;
    std::vector<Tree> trees_;
};

/// Every row must carry a label; at least two distinct classes are required.
Model train(const FeatureMatrix &matrix, const GbdtParams &params = {});

void save_model(const std::filesystem::path &path, const Model &model);
Model load_model(const std::filesystem::path &path);

struct ImportanceEntry {
    std::string feature;
    double gain = 0.0;
};

using ImportanceReport = std::vector<ImportanceEntry>;

/// Mean split gain per feature, descending; ties keep schema order. Unused features score 0.
ImportanceReport feature_importance(const Model &model, std::size_t top_n = SIZE_MAX);

nlohmann::json to_json(const ImportanceReport &report);

using ConfusionMatrix = std::array<std::array<std::size_t, kNumActions>, kNumActions>;

struct HeldOutPrediction {
    std::size_t row = 0;
    std::string trace_id;
    ActionLabel truth = ActionLabel::PickAndPlace;
    ActionLabel predicted = ActionLabel::PickAndPlace;
    int fold = 0;
};

struct CVReport {
    int folds = 0;
    std::vector<double> fold_accuracy;
    double accuracy = 0.0;
    ConfusionMatrix confusion{};   ///< rows = true class, columns = predicted
    std::array<double, kNumActions> precision{};
    std::array<double, kNumActions> recall{};
    std::vector<HeldOutPrediction> predictions;
};

nlohmann::json to_json(const CVReport &report);

/// Fold index of every row: per class, rows are shuffled with the seed and dealt round-robin.
/// Throws TooFewSamples if a present class has fewer than k rows.
std::vector<int> stratified_folds(const std::vector<ActionLabel> &labels, int k, std::uint64_t seed);

CVReport cross_validate(const FeatureMatrix &matrix, int k = 10, const GbdtParams &params = {});

/// Trains each fold on `train_matrix` rows and scores the same held-out rows of
/// `test_matrix`; both must list the same traces in the same order.
CVReport cross_validate(const FeatureMatrix &train_matrix, const FeatureMatrix &test_matrix, int k,
                        const GbdtParams &params);

} // namespace robofp

#endif // ROBOFP_CLASSIFIER_HPP
