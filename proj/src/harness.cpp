#include "robofp/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <sstream>

#include "robofp/parallel.hpp"

namespace robofp {

namespace {

constexpr std::size_t kTopFeatures = 20;

template <typename Fn>
auto with_context(const std::string &step, const ExperimentConfig &cfg, Fn &&fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const HarnessError &) {
        throw;
    } catch (const std::exception &e) {
        throw HarnessError{step + " [config " + config_fingerprint(cfg) + "]: " + e.what(), std::current_exception()};
    }
}

std::string feature_set_name(FeatureSet set) { return set == FeatureSet::Full ? "full" : "summary_only"; }

FeatureSet parse_feature_set(const std::string &name) {
    if (name == "full") {
        return FeatureSet::Full;
    }
    if (name == "summary_only") {
        return FeatureSet::SummaryOnly;
    }
    throw std::invalid_argument{"unknown feature_set '" + name + "' (expected full or summary_only)"};
}

std::size_t cartesian_cluster_count(const Trace &trace, const KernelBank &bank, const SigprocConfig &sc) {
    for (const auto &[name, value] : command_features(trace, bank, sc)) {
        if (name == "cartesian_cluster_count") {
            return static_cast<std::size_t>(value);
        }
    }
    return 0;
}

DefenseReport aggregate(const std::vector<DefenseReport> &reports) {
    DefenseReport agg;
    if (reports.empty()) {
        return agg;
    }
    for (const auto &r : reports) {
        agg.bandwidth_overhead += r.bandwidth_overhead;
        agg.mean_added_latency += r.mean_added_latency;
        agg.max_added_latency = std::max(agg.max_added_latency, r.max_added_latency);
        agg.original_bytes += r.original_bytes;
        agg.defended_bytes += r.defended_bytes;
        agg.dummy_packets += r.dummy_packets;
    }
    const auto n = static_cast<double>(reports.size());
    agg.bandwidth_overhead /= n;
    agg.mean_added_latency /= n;
    return agg;
}

std::string csv_line(std::initializer_list<std::string> fields) {
    std::string out;
    for (const auto &f : fields) {
        if (!out.empty()) {
            out += ',';
        }
        out += f;
    }
    return out + '\n';
}

std::string num(const nlohmann::json &v) { return format_number(v.get<double>()); }

} // namespace

HarnessError::HarnessError(const std::string &context, std::exception_ptr cause)
    : std::runtime_error{context}, cause_{std::move(cause)} {}

void ExperimentConfig::set_seed(std::uint64_t seed) {
    gen.seed = seed;
    classifier.seed = seed;
}

nlohmann::json to_json(const ExperimentConfig &cfg) {
    nlohmann::json dataset;
    if (cfg.manifest) {
        dataset = {{"manifest", cfg.manifest->generic_string()}};
    } else {
        dataset = {{"generate", to_json(cfg.gen)}};
    }
    nlohmann::json defenses = nlohmann::json::array();
    for (const auto &d : cfg.defenses) {
        defenses.push_back(to_json(d));
    }
    return {
        {"dataset", std::move(dataset)},
        {"sigproc", to_json(cfg.sigproc)},
        {"kernel_bank", cfg.kernel_bank ? nlohmann::json(cfg.kernel_bank->generic_string()) : nlohmann::json()},
        {"kernel_sample", cfg.kernel_sample},
        {"classifier", to_json(cfg.classifier)},
        {"folds", cfg.folds},
        {"feature_set", feature_set_name(cfg.feature_set)},
        {"defenses", std::move(defenses)},
        {"defense_retrain", cfg.defense_retrain},
        {"thresholds", cfg.thresholds},
        {"out_dir", cfg.out_dir.generic_string()},
    };
}

ExperimentConfig experiment_config_from_json(const nlohmann::json &j) {
    ExperimentConfig cfg;
    if (j.contains("dataset")) {
        const auto &d = j.at("dataset");
        if (d.contains("manifest")) {
            cfg.manifest = std::filesystem::path{d.at("manifest").get<std::string>()};
        } else if (d.contains("generate")) {
            cfg.gen = gen_config_from_json(d.at("generate"));
        } else {
            throw std::invalid_argument{"dataset needs either 'manifest' or 'generate'"};
        }
    }
    if (j.contains("sigproc")) {
        cfg.sigproc = sigproc_config_from_json(j.at("sigproc"));
    }
    if (j.contains("kernel_bank") && !j.at("kernel_bank").is_null()) {
        cfg.kernel_bank = std::filesystem::path{j.at("kernel_bank").get<std::string>()};
    }
    cfg.kernel_sample = j.value("kernel_sample", cfg.kernel_sample);
    if (j.contains("classifier")) {
        cfg.classifier = gbdt_params_from_json(j.at("classifier"));
    }
    cfg.folds = j.value("folds", cfg.folds);
    if (cfg.folds < 2) {
        throw std::invalid_argument{"folds must be at least 2"};
    }
    cfg.feature_set = parse_feature_set(j.value("feature_set", std::string{"full"}));
    for (const auto &d : j.value("defenses", nlohmann::json::array())) {
        cfg.defenses.push_back(defense_config_from_json(d));
    }
    cfg.defense_retrain = j.value("defense_retrain", cfg.defense_retrain);
    cfg.thresholds = j.value("thresholds", cfg.thresholds);
    for (double t : cfg.thresholds) {
        if (t < 0.0 || t > 1.3) {
            throw std::invalid_argument{"thresholds must lie in [0, 1.3]"};
        }
    }
    cfg.out_dir = j.value("out_dir", cfg.out_dir.generic_string());
    return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path &path) {
    ExperimentConfig cfg = experiment_config_from_json(nlohmann::json::parse(read_text_file(path)));
    const auto base = path.parent_path();
    if (cfg.manifest && cfg.manifest->is_relative()) {
        cfg.manifest = base / *cfg.manifest;
    }
    if (cfg.kernel_bank && cfg.kernel_bank->is_relative()) {
        cfg.kernel_bank = base / *cfg.kernel_bank;
    }
    return cfg;
}

std::string config_fingerprint(const ExperimentConfig &cfg) {
    auto j = to_json(cfg);
    j.erase("out_dir");
    return fnv1a_hex(j.dump());
}

std::vector<double> default_threshold_grid() {
    std::vector<double> grid;
    for (int i = 0; i <= 13; ++i) {
        grid.push_back(i / 10.0);
    }
    return grid;
}

std::vector<DefenseConfig> padding_sweep_defenses() {
    std::vector<DefenseConfig> out;
    for (int x = 1; x <= 10; ++x) {
        DefenseConfig d;
        d.padding.x = x;
        out.push_back(d);
    }
    return out;
}

std::vector<DefenseConfig> modulation_sweep_defenses() {
    std::vector<DefenseConfig> out;
    for (const char *rate : {"rate-10ms", "rate-1ms", "rate-100us"}) {
        for (int s_p = 100; s_p <= 1000; s_p += 100) {
            DefenseConfig d;
            d.type = DefenseType::Modulation;
            d.modulation = modulation_preset(rate, s_p);
            out.push_back(d);
        }
    }
    return out;
}

Dataset load_experiment_dataset(const ExperimentConfig &cfg) {
    return with_context("loading dataset", cfg, [&] {
        Dataset ds = cfg.manifest ? load_dataset(*cfg.manifest) : gen_dataset(cfg.gen);
        if (ds.traces.empty()) {
            throw TraceError{TraceErrorKind::EmptyDataset, 0, "dataset has no traces"};
        }
        return ds;
    });
}

KernelBank load_experiment_kernels(const ExperimentConfig &cfg) {
    return with_context("loading kernels", cfg, [&] {
        return cfg.kernel_bank ? read_kernel_bank(*cfg.kernel_bank)
                               : build_kernel_bank(cfg.gen, cfg.sigproc.bin_width, cfg.kernel_sample);
    });
}

ExperimentReport run_attack_experiment(const ExperimentConfig &cfg) {
    const Dataset ds = load_experiment_dataset(cfg);
    const KernelBank bank = load_experiment_kernels(cfg);
    return with_context("attack experiment", cfg, [&] {
        ExperimentReport report;
        report.config = cfg;
        report.fingerprint = config_fingerprint(cfg);
        const FeatureMatrix m = featurize_dataset(ds, bank, cfg.sigproc, cfg.feature_set);
        report.schema = m.schema;
        report.cv = cross_validate(m, cfg.folds, cfg.classifier);
        report.importance = feature_importance(train(m, cfg.classifier), kTopFeatures);
        for (const auto &t : ds.traces) {
            report.trace_ids.push_back(t.trace_id);
        }
        return report;
    });
}

std::vector<ThresholdPoint> threshold_sweep(const ExperimentConfig &cfg, const std::vector<double> &thresholds) {
    const Dataset ds = load_experiment_dataset(cfg);
    const KernelBank bank = load_experiment_kernels(cfg);
    std::vector<ThresholdPoint> out;
    for (double t : thresholds) {
        out.push_back(with_context("threshold sweep at t=" + format_number(t), cfg, [&] {
            if (t < 0.0 || t > 1.3) {
                throw std::invalid_argument{"threshold outside [0, 1.3]"};
            }
            ExperimentConfig c = cfg;
            c.sigproc.cartesian_threshold = t;
            const FeatureMatrix m = featurize_dataset(ds, bank, c.sigproc, c.feature_set);
            ThresholdPoint p;
            p.threshold = t;
            p.accuracy = cross_validate(m, c.folds, c.classifier).accuracy;
            p.cluster_counts.resize(ds.traces.size());
            const auto &names = m.schema.names;
            const auto col = std::find(names.begin(), names.end(), "cartesian_cluster_count");
            if (col != names.end()) {
                const auto k = static_cast<std::size_t>(col - names.begin());
                for (std::size_t i = 0; i < m.rows.size(); ++i) {
                    p.cluster_counts[i] = static_cast<std::size_t>(m.rows[i].values[k]);
                }
            } else {
                parallel_for(ds.traces.size(), [&](std::size_t i) {
                    p.cluster_counts[i] = cartesian_cluster_count(ds.traces[i], bank, c.sigproc);
                });
            }
            return p;
        }));
    }
    return out;
}

std::vector<DefenseResult> run_defense_sweep(const ExperimentConfig &cfg, const std::vector<DefenseConfig> &defenses) {
    const Dataset ds = load_experiment_dataset(cfg);
    const KernelBank bank = load_experiment_kernels(cfg);
    std::optional<FeatureMatrix> clean;
    if (!cfg.defense_retrain) {
        clean = with_context("featurizing clean traces", cfg,
                             [&] { return featurize_dataset(ds, bank, cfg.sigproc, cfg.feature_set); });
    }
    std::vector<DefenseResult> out;
    for (const auto &d : defenses) {
        out.push_back(with_context("defense " + d.name(), cfg, [&] {
            FeatureMatrix m;
            m.schema = make_schema(bank, cfg.sigproc, cfg.feature_set);
            m.rows.resize(ds.traces.size());
            std::vector<DefenseReport> reports(ds.traces.size());
            // defended traces can hold millions of packets; featurize each one and drop it
            parallel_for(ds.traces.size(), [&](std::size_t i) {
                auto [defended, report] = apply_defense(ds.traces[i], d);
                reports[i] = report;
                m.rows[i] = featurize(defended.trace, bank, cfg.sigproc, cfg.feature_set);
            });
            DefenseResult r;
            r.config = d;
            r.report = aggregate(reports);
            r.cv = clean ? cross_validate(*clean, m, cfg.folds, cfg.classifier)
                         : cross_validate(m, cfg.folds, cfg.classifier);
            return r;
        }));
    }
    return out;
}

ExperimentReport run_full_experiment(const ExperimentConfig &cfg) {
    ExperimentReport report = run_attack_experiment(cfg);
    if (!cfg.thresholds.empty()) {
        report.threshold_sweep = threshold_sweep(cfg, cfg.thresholds);
    }
    if (!cfg.defenses.empty()) {
        report.defenses = run_defense_sweep(cfg, cfg.defenses);
    }
    return report;
}

nlohmann::json to_json(const ExperimentReport &r, const std::string &generated_at) {
    nlohmann::json thresholds = nlohmann::json::array();
    for (const auto &p : r.threshold_sweep) {
        thresholds.push_back({{"t", p.threshold}, {"accuracy", p.accuracy}, {"cluster_counts", p.cluster_counts}});
    }
    nlohmann::json defenses = nlohmann::json::array();
    for (const auto &d : r.defenses) {
        defenses.push_back({{"name", d.config.name()},
                            {"config", to_json(d.config)},
                            {"report", to_json(d.report)},
                            {"cv", to_json(d.cv)}});
    }
    auto config = to_json(r.config);
    config.erase("out_dir");
    nlohmann::json attack;
    if (r.cv) {
        attack = {{"cv", to_json(*r.cv)}, {"importance", to_json(r.importance)}};
    }
    return {
        {"generated_at", generated_at},
        {"config", std::move(config)},
        {"fingerprint", r.fingerprint},
        {"schema", to_json(r.schema)},
        {"attack", std::move(attack)},
        {"threshold_sweep", std::move(thresholds)},
        {"defenses", std::move(defenses)},
        {"trace_ids", r.trace_ids},
    };
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::vector<std::pair<std::string, std::string>> report_csvs(const nlohmann::json &report) {
    std::vector<std::pair<std::string, std::string>> files;
    const auto &attack = report.at("attack");
    if (!attack.is_null()) {
        const auto &cv = attack.at("cv");
        std::string cm = "true";
        for (const auto &c : cv.at("classes")) {
            cm += "," + c.get<std::string>();
        }
        cm += '\n';
        for (std::size_t i = 0; i < cv.at("classes").size(); ++i) {
            cm += cv.at("classes")[i].get<std::string>();
            for (const auto &v : cv.at("confusion_matrix")[i]) {
                cm += "," + std::to_string(v.get<std::size_t>());
            }
            cm += '\n';
        }
        files.emplace_back("confusion_matrix.csv", cm);

        std::string imp = "rank,feature,gain\n";
        std::size_t rank = 1;
        for (const auto &e : attack.at("importance")) {
            imp += csv_line({std::to_string(rank++), e.at("feature").get<std::string>(), num(e.at("gain"))});
        }
        files.emplace_back("feature_importance.csv", imp);

        std::string folds = "fold,accuracy\n";
        std::size_t f = 0;
        for (const auto &a : cv.at("fold_accuracy")) {
            folds += csv_line({std::to_string(f++), num(a)});
        }
        files.emplace_back("fold_accuracy.csv", folds);
    }
    if (!report.at("threshold_sweep").empty()) {
        std::string ts = "t,accuracy\n";
        for (const auto &p : report.at("threshold_sweep")) {
            ts += csv_line({num(p.at("t")), num(p.at("accuracy"))});
        }
        files.emplace_back("threshold_sweep.csv", ts);
    }
    std::string pad = "x_or_rate,accuracy,overhead\n";
    std::string mod = "x_or_rate,s_p,accuracy,overhead,max_added_latency,mean_added_latency\n";
    bool any_pad = false, any_mod = false;
    for (const auto &d : report.at("defenses")) {
        const auto &c = d.at("config");
        const auto &rep = d.at("report");
        const std::string acc = num(d.at("cv").at("accuracy"));
        if (c.at("type") == "padding") {
            any_pad = true;
            pad += csv_line({std::to_string(c.at("x").get<int>()), acc, num(rep.at("bandwidth_overhead"))});
        } else {
            any_mod = true;
            mod += csv_line({num(c.at("t_i")), std::to_string(c.at("s_p").get<int>()), acc,
                             num(rep.at("bandwidth_overhead")), num(rep.at("max_added_latency")),
                             num(rep.at("mean_added_latency"))});
        }
    }
    if (any_pad) {
        files.emplace_back("padding_sweep.csv", pad);
    }
    if (any_mod) {
        files.emplace_back("modulation_sweep.csv", mod);
    }
    return files;
}

void write_report_files(const nlohmann::json &report, const std::filesystem::path &out_dir) {
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir / "report.json", report.dump(2) + "\n");
    for (const auto &[name, text] : report_csvs(report)) {
        write_text_file(out_dir / name, text);
    }
}

std::string summary_table(const nlohmann::json &report) {
    std::ostringstream os;
    os << "config fingerprint " << report.value("fingerprint", std::string{}) << "\n";
    const auto &attack = report.at("attack");
    if (!attack.is_null()) {
        const auto &cv = attack.at("cv");
        os << "cv accuracy " << num(cv.at("accuracy")) << " over " << cv.at("folds").get<int>() << " folds\n";
        os << "fold accuracy";
        for (const auto &a : cv.at("fold_accuracy")) {
            os << ' ' << num(a);
        }
        os << "\nconfusion (rows = true)\n";
        for (std::size_t i = 0; i < cv.at("classes").size(); ++i) {
            os << "  " << cv.at("classes")[i].get<std::string>();
            for (const auto &v : cv.at("confusion_matrix")[i]) {
                os << ' ' << v.get<std::size_t>();
            }
            os << '\n';
        }
        os << "top features\n";
        std::size_t shown = 0;
        for (const auto &e : attack.at("importance")) {
            if (shown++ == 10) {
                break;
            }
            os << "  " << e.at("feature").get<std::string>() << ' ' << num(e.at("gain")) << '\n';
        }
    }
    for (const auto &p : report.at("threshold_sweep")) {
        os << "t=" << num(p.at("t")) << " accuracy " << num(p.at("accuracy")) << '\n';
    }
    for (const auto &d : report.at("defenses")) {
        os << d.at("name").get<std::string>() << " accuracy " << num(d.at("cv").at("accuracy")) << " overhead "
           << num(d.at("report").at("bandwidth_overhead")) << " max latency "
           << num(d.at("report").at("max_added_latency")) << '\n';
    }
    return os.str();
}

} // namespace robofp
