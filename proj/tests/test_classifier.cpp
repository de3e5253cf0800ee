#include <doctest.h>

#include <cmath>
#include <set>

#include "robofp/classifier.hpp"
#include "robofp/rng.hpp"

using namespace robofp;

namespace {

FeatureMatrix make_matrix(std::size_t n_features) {
    FeatureMatrix m;
    for (std::size_t j = 0; j < n_features; ++j) {
        m.schema.names.push_back("f" + std::to_string(j));
    }
    m.schema.fingerprint = "test-" + std::to_string(n_features);
    return m;
}

void add_row(FeatureMatrix &m, std::vector<double> values, ActionLabel label) {
    FeatureVector v;
    v.values = std::move(values);
    v.label = label;
    v.trace_id = "r" + std::to_string(m.rows.size());
    m.rows.push_back(std::move(v));
}

ActionLabel label_at(int i) { return kAllActions[static_cast<std::size_t>(i) % kNumActions]; }

// class c is centered at 10 * c on feature 0; other features are noise
FeatureMatrix separable(int per_class, std::size_t noise, std::uint64_t seed) {
    FeatureMatrix m = make_matrix(1 + noise);
    Rng rng{seed};
    for (int i = 0; i < per_class * static_cast<int>(kNumActions); ++i) {
        const int c = i % static_cast<int>(kNumActions);
        std::vector<double> v{10.0 * c + rng.uniform(-1.0, 1.0)};
        for (std::size_t j = 0; j < noise; ++j) {
            v.push_back(rng.uniform(0.0, 1.0));
        }
        add_row(m, std::move(v), label_at(c));
    }
    return m;
}

GbdtParams small_params() {
    GbdtParams p;
    p.rounds = 20;
    return p;
}

} // namespace

TEST_CASE("separable data is classified perfectly") {
    const auto m = separable(20, 3, 1);
    const Model model = train(m, small_params());
    CHECK(model.trees().size() == 20 * kNumActions);
    for (const auto &row : m.rows) {
        CHECK(model.predict(row, m.schema).label == *row.label);
    }
    CHECK(cross_validate(m, 5, small_params()).accuracy == 1.0);
}

TEST_CASE("training input validation") {
    FeatureMatrix one = make_matrix(2);
    for (int i = 0; i < 10; ++i) {
        add_row(one, {double(i), 1.0}, ActionLabel::PressKey);
    }
    try {
        train(one);
        FAIL("expected SingleClass");
    } catch (const ClassifierError &e) {
        CHECK(e.kind() == ClassifierErrorKind::SingleClass);
    }
    FeatureMatrix unlabeled = separable(3, 0, 2);
    unlabeled.rows[4].label.reset();
    try {
        train(unlabeled);
        FAIL("expected MissingLabel");
    } catch (const ClassifierError &e) {
        CHECK(e.kind() == ClassifierErrorKind::MissingLabel);
    }
    FeatureMatrix nan = separable(3, 0, 2);
    nan.rows[0].values[0] = std::nan("");
    CHECK_THROWS_AS(train(nan), ClassifierError);
}

TEST_CASE("a non-linear XOR pattern is learned") {
    FeatureMatrix m = make_matrix(2);
    Rng rng{3};
    for (int i = 0; i < 400; ++i) {
        const double a = rng.uniform(-1.0, 1.0), b = rng.uniform(-1.0, 1.0);
        add_row(m, {a, b}, (a > 0) == (b > 0) ? ActionLabel::PourWater : ActionLabel::PressKey);
    }
    const Model model = train(m, small_params());
    std::size_t right = 0;
    for (const auto &row : m.rows) {
        right += model.predict(row, m.schema).label == *row.label;
    }
    CHECK(static_cast<double>(right) / 400.0 >= 0.95);
}

TEST_CASE("scores form a distribution") {
    const auto m = separable(10, 4, 4);
    const Model model = train(m, small_params());
    Rng rng{5};
    for (int i = 0; i < 1000; ++i) {
        std::vector<double> v(5);
        for (double &x : v) {
            x = rng.uniform(-50.0, 50.0);
        }
        const auto p = model.predict(v, m.schema.fingerprint);
        double sum = 0.0;
        std::size_t best = 0;
        for (std::size_t c = 0; c < kNumActions; ++c) {
            CHECK(p.scores[c] >= 0.0);
            CHECK(p.scores[c] <= 1.0);
            sum += p.scores[c];
            if (p.scores[c] > p.scores[best]) {
                best = c;
            }
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(p.label == kAllActions[best]);
    }
}

TEST_CASE("prediction rejects a foreign schema") {
    const auto m = separable(5, 2, 6);
    const Model model = train(m, small_params());
    const std::vector<double> short_row{1.0, 2.0};
    try {
        model.predict(short_row, m.schema.fingerprint);
        FAIL("expected SchemaMismatch");
    } catch (const ClassifierError &e) {
        CHECK(e.kind() == ClassifierErrorKind::SchemaMismatch);
    }
    CHECK_THROWS_AS(model.predict(m.rows[0].values, "other"), ClassifierError);
}

TEST_CASE("stratified folds partition every class evenly") {
    std::vector<ActionLabel> labels;
    for (int i = 0; i < 200; ++i) {
        labels.push_back(label_at(i));
    }
    const auto folds = stratified_folds(labels, 10, 42);
    REQUIRE(folds.size() == 200);
    for (int f = 0; f < 10; ++f) {
        for (auto c : kAllActions) {
            std::size_t n = 0;
            for (std::size_t i = 0; i < 200; ++i) {
                n += folds[i] == f && labels[i] == c;
            }
            CHECK(n == 5);
        }
    }
    CHECK(folds == stratified_folds(labels, 10, 42));
    CHECK(folds != stratified_folds(labels, 10, 43));

    std::vector<ActionLabel> uneven(labels.begin(), labels.begin() + 30);
    uneven.push_back(ActionLabel::PickAndPlace);
    const auto uf = stratified_folds(uneven, 4, 1);
    for (auto c : kAllActions) {
        std::vector<int> per(4, 0);
        for (std::size_t i = 0; i < uneven.size(); ++i) {
            if (uneven[i] == c) {
                ++per[static_cast<std::size_t>(uf[i])];
            }
        }
        CHECK(*std::max_element(per.begin(), per.end()) - *std::min_element(per.begin(), per.end()) <= 1);
    }

    std::vector<ActionLabel> few(labels.begin(), labels.begin() + 8);
    try {
        stratified_folds(few, 10, 1);
        FAIL("expected TooFewSamples");
    } catch (const ClassifierError &e) {
        CHECK(e.kind() == ClassifierErrorKind::TooFewSamples);
    }
}

TEST_CASE("feature importance") {
    const auto m = separable(25, 5, 7);
    const Model model = train(m, small_params());
    const auto all = feature_importance(model);
    REQUIRE(!all.empty());
    CHECK(all.front().feature == "f0");
    for (std::size_t i = 1; i < all.size(); ++i) {
        CHECK(all[i - 1].gain >= all[i].gain);
    }
    CHECK(feature_importance(model, 2).size() == 2);
    CHECK(feature_importance(model, 100).size() == all.size());

    FeatureMatrix with_const = make_matrix(2);
    for (const auto &row : m.rows) {
        add_row(with_const, {row.values[0], 3.0}, *row.label);
    }
    for (const auto &e : feature_importance(train(with_const, small_params()))) {
        if (e.feature == "f1") {
            CHECK(e.gain == 0.0);
        }
    }
}

TEST_CASE("cross-validation is deterministic and internally consistent") {
    const auto m = separable(20, 6, 8);
    FeatureMatrix noisy = m;
    Rng rng{9};
    for (auto &row : noisy.rows) {
        row.values[0] += rng.uniform(-12.0, 12.0);
    }
    const auto a = cross_validate(noisy, 5, small_params());
    const auto b = cross_validate(noisy, 5, small_params());
    CHECK(a.accuracy == b.accuracy);
    CHECK(a.confusion == b.confusion);
    CHECK(to_json(a) == to_json(b));
    std::size_t diag = 0, total = 0;
    for (std::size_t i = 0; i < kNumActions; ++i) {
        for (std::size_t j = 0; j < kNumActions; ++j) {
            total += a.confusion[i][j];
            diag += i == j ? a.confusion[i][j] : 0;
        }
    }
    CHECK(total == noisy.rows.size());
    CHECK(static_cast<double>(diag) / static_cast<double>(total) == doctest::Approx(a.accuracy));
    CHECK(a.fold_accuracy.size() == 5);
    CHECK(a.predictions.size() == noisy.rows.size());
    for (std::size_t i = 0; i < a.predictions.size(); ++i) {
        CHECK(a.predictions[i].row == i);
        CHECK(a.predictions[i].trace_id == noisy.rows[i].trace_id);
    }
}

TEST_CASE("scaling features by a positive constant leaves predictions unchanged") {
    auto m = separable(15, 3, 10);
    Rng rng{11};
    for (auto &row : m.rows) {
        row.values[1] += row.values[0] * 0.05;
    }
    FeatureMatrix scaled = m;
    for (auto &row : scaled.rows) {
        for (double &v : row.values) {
            v *= 8.0;   // exact in binary, so split order is preserved bit for bit
        }
    }
    const Model a = train(m, small_params());
    const Model b = train(scaled, small_params());
    for (int i = 0; i < 300; ++i) {
        std::vector<double> v(4);
        for (double &x : v) {
            x = rng.uniform(-5.0, 45.0);
        }
        std::vector<double> w = v;
        for (double &x : w) {
            x *= 8.0;
        }
        CHECK(a.predict(v, m.schema.fingerprint).label == b.predict(w, scaled.schema.fingerprint).label);
    }
}

TEST_CASE("model JSON round-trips") {
    const auto m = separable(10, 3, 12);
    const Model model = train(m, small_params());
    const Model back = Model::from_json(nlohmann::json::parse(model.to_json().dump()));
    CHECK(back.to_json() == model.to_json());
    for (const auto &row : m.rows) {
        CHECK(back.predict(row, m.schema).scores == model.predict(row, m.schema).scores);
    }
    auto bad = model.to_json();
    bad["format"] = "other";
    CHECK_THROWS(Model::from_json(bad));
    CHECK(to_json(small_params()) == to_json(gbdt_params_from_json(to_json(small_params()))));
    nlohmann::json bad_params = to_json(small_params());
    bad_params["max_depth"] = 0;
    CHECK_THROWS(gbdt_params_from_json(bad_params));
}
