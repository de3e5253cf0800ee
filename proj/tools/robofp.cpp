// robofp command-line front end.
//
// exit status: 0 success, 2 usage error, 1 runtime error

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "robofp/classifier.hpp"
#include "robofp/defenses.hpp"
#include "robofp/features.hpp"
#include "robofp/harness.hpp"
#include "robofp/synth.hpp"

namespace fs = std::filesystem;
using namespace robofp;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Options shared by the subcommands that run experiments.
struct ExperimentOptions {
    std::string config;
    std::string manifest;
    std::string kernels;
    std::optional<std::uint64_t> seed;
    std::optional<int> samples_per_class;
    std::optional<int> folds;
    std::string feature_set;
    std::string out_dir;

    void attach(CLI::App *app, bool out_required) {
        app->add_option("--config", config, "experiment config JSON");
        app->add_option("--manifest", manifest, "dataset manifest (instead of generating)");
        app->add_option("--kernels", kernels, "kernel bank JSON (default: built from generator templates)");
        app->add_option("--seed", seed, "seed for generation and cross-validation");
        app->add_option("--samples-per-class", samples_per_class, "traces per class when generating");
        app->add_option("--folds", folds, "cross-validation folds");
        app->add_option("--feature-set", feature_set, "full or summary_only");
        auto *o = app->add_option("--out-dir", out_dir, "output directory");
        if (out_required) {
            o->required();
        }
    }

    ExperimentConfig resolve() const {
        ExperimentConfig cfg = config.empty() ? ExperimentConfig{} : load_experiment_config(config);
        if (!manifest.empty()) {
            cfg.manifest = fs::path{manifest};
        }
        if (!kernels.empty()) {
            cfg.kernel_bank = fs::path{kernels};
        }
        if (seed) {
            cfg.set_seed(*seed);
        }
        if (samples_per_class) {
            if (*samples_per_class < 1) {
                throw UsageError{"--samples-per-class must be at least 1"};
            }
            cfg.gen.samples_per_class = *samples_per_class;
        }
        if (folds) {
            if (*folds < 2) {
                throw UsageError{"--folds must be at least 2"};
            }
            cfg.folds = *folds;
        }
        if (feature_set == "full") {
            cfg.feature_set = FeatureSet::Full;
        } else if (feature_set == "summary_only") {
            cfg.feature_set = FeatureSet::SummaryOnly;
        } else if (!feature_set.empty()) {
            throw UsageError{"--feature-set must be full or summary_only"};
        }
        if (!out_dir.empty()) {
            cfg.out_dir = out_dir;
        }
        return cfg;
    }
};

void emit_report(const ExperimentReport &report) {
    const auto j = to_json(report, utc_timestamp());
    write_report_files(j, report.config.out_dir);
    std::cout << summary_table(j);
}

std::vector<double> parse_list(const std::string &text) {
    std::vector<double> out;
    std::stringstream ss{text};
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) {
                throw std::invalid_argument{item};
            }
        } catch (const std::exception &) {
            throw UsageError{"bad number '" + item + "' in list"};
        }
    }
    return out;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Robot action fingerprinting from encrypted-traffic metadata"};
    app.require_subcommand(1);

    // generate
    auto *gen_cmd = app.add_subcommand("generate", "generate a labeled synthetic dataset");
    std::uint64_t gen_seed = 42;
    int gen_spc = 50;
    std::string gen_config, gen_out;
    gen_cmd->add_option("--seed", gen_seed, "generator seed");
    gen_cmd->add_option("--samples-per-class", gen_spc, "traces per class")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--config", gen_config, "generator config JSON");
    gen_cmd->add_option("--out-dir", gen_out, "output directory")->required();

    // kernels
    auto *ker_cmd = app.add_subcommand("kernels", "build the kernel bank from the generator templates");
    std::uint64_t ker_seed = 42;
    int ker_sample = 0;
    double ker_bw = kDefaultBinWidth;
    std::string ker_config, ker_out;
    ker_cmd->add_option("--seed", ker_seed, "seed for randomized kernel samples");
    ker_cmd->add_option("--sample", ker_sample, "0 for nominal templates, >0 for randomized ones");
    ker_cmd->add_option("--bin-width", ker_bw, "bin width in seconds")->check(CLI::PositiveNumber);
    ker_cmd->add_option("--config", ker_config, "generator config JSON");
    ker_cmd->add_option("--out-dir", ker_out, "output directory")->required();

    // featurize
    auto *feat_cmd = app.add_subcommand("featurize", "extract feature vectors for every trace");
    ExperimentOptions feat_opts;
    feat_opts.attach(feat_cmd, true);

    // train
    auto *train_cmd = app.add_subcommand("train", "train a classifier on extracted features");
    std::string train_features, train_schema, train_out;
    GbdtParams train_params;
    train_cmd->add_option("--features", train_features, "features.csv from featurize")->required();
    train_cmd->add_option("--schema", train_schema, "schema.json from featurize")->required();
    train_cmd->add_option("--rounds", train_params.rounds, "boosting rounds")->check(CLI::PositiveNumber);
    train_cmd->add_option("--max-depth", train_params.max_depth, "tree depth")->check(CLI::PositiveNumber);
    train_cmd->add_option("--eta", train_params.eta, "learning rate")->check(CLI::PositiveNumber);
    train_cmd->add_option("--seed", train_params.seed, "classifier seed");
    train_cmd->add_option("--out-dir", train_out, "output directory")->required();

    // evaluate
    auto *eval_cmd = app.add_subcommand("evaluate", "cross-validated attack plus configured sweeps");
    ExperimentOptions eval_opts;
    eval_opts.attach(eval_cmd, false);

    // sweep-threshold
    auto *thr_cmd = app.add_subcommand("sweep-threshold", "attack accuracy across Cartesian thresholds");
    ExperimentOptions thr_opts;
    thr_opts.attach(thr_cmd, false);
    std::string thr_list;
    thr_cmd->add_option("--thresholds", thr_list, "comma-separated thresholds (default 0,0.1,...,1.3)");

    // defend
    auto *def_cmd = app.add_subcommand("defend", "apply a defense to traces");
    std::string def_trace, def_manifest, def_preset, def_out;
    std::optional<int> def_padding;
    bool def_modulation = false, def_no_idle = false;
    ModulationConfig def_mod;
    auto *def_input = def_cmd->add_option("--trace", def_trace, "single trace CSV");
    def_cmd->add_option("--manifest", def_manifest, "dataset manifest")->excludes(def_input);
    auto *pad_opt = def_cmd->add_option("--padding", def_padding, "padding multiplier x (1..10)");
    def_cmd->add_flag("--modulation", def_modulation, "constant-rate modulation")->excludes(pad_opt);
    def_cmd->add_option("--preset", def_preset, "rate-10ms, rate-1ms or rate-100us");
    def_cmd->add_option("--s-p", def_mod.s_p, "modulation packet size");
    def_cmd->add_option("--t-i", def_mod.t_i, "modulation send interval (s)");
    def_cmd->add_option("--L", def_mod.L, "permissible latency (s)");
    def_cmd->add_option("--tail-dummies", def_mod.tail_dummies, "seconds of dummies after the last segment");
    def_cmd->add_flag("--no-idle-dummies", def_no_idle, "leave idle slots empty between messages");
    def_cmd->add_option("--out-dir", def_out, "output directory")->required();

    // sweep-defense
    auto *sd_cmd = app.add_subcommand("sweep-defense", "attack accuracy and overhead under defenses");
    ExperimentOptions sd_opts;
    sd_opts.attach(sd_cmd, false);
    bool sd_padding = false, sd_modulation = false, sd_no_retrain = false;
    std::string sd_list;
    sd_cmd->add_flag("--padding-sweep", sd_padding, "padding x = 1..10");
    sd_cmd->add_flag("--modulation-sweep", sd_modulation, "all rate presets with s_p = 100..1000");
    sd_cmd->add_option("--defenses", sd_list, "JSON file with a list of defense configs");
    sd_cmd->add_flag("--no-retrain", sd_no_retrain, "score defended traces with models trained on clean traffic");

    // report
    auto *rep_cmd = app.add_subcommand("report", "summarize a report and rewrite its CSVs");
    std::string rep_input, rep_out;
    rep_cmd->add_option("--input", rep_input, "report.json")->required();
    rep_cmd->add_option("--out-dir", rep_out, "directory for regenerated CSVs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError &e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (*gen_cmd) {
            GenConfig cfg = gen_config.empty() ? GenConfig{} : gen_config_from_json(nlohmann::json::parse(read_text_file(gen_config)));
            if (gen_cmd->count("--seed") || gen_config.empty()) {
                cfg.seed = gen_seed;
            }
            if (gen_cmd->count("--samples-per-class") || gen_config.empty()) {
                cfg.samples_per_class = gen_spc;
            }
            const Dataset ds = gen_dataset(cfg, gen_out);
            std::cout << "wrote " << ds.traces.size() << " traces to " << gen_out << "\n";
        } else if (*ker_cmd) {
            GenConfig cfg = ker_config.empty() ? GenConfig{} : gen_config_from_json(nlohmann::json::parse(read_text_file(ker_config)));
            if (ker_cmd->count("--seed") || ker_config.empty()) {
                cfg.seed = ker_seed;
            }
            fs::create_directories(ker_out);
            const KernelBank bank = build_kernel_bank(cfg, ker_bw, ker_sample);
            write_kernel_bank(fs::path{ker_out} / "kernels.json", bank);
            for (const auto &k : bank) {
                std::cout << to_string(k.kind) << ": " << k.values.size() << " bins\n";
            }
        } else if (*feat_cmd) {
            const ExperimentConfig cfg = feat_opts.resolve();
            const Dataset ds = load_experiment_dataset(cfg);
            const KernelBank bank = load_experiment_kernels(cfg);
            const FeatureMatrix m = featurize_dataset(ds, bank, cfg.sigproc, cfg.feature_set);
            fs::create_directories(cfg.out_dir);
            write_text_file(cfg.out_dir / "features.csv", write_feature_csv(m));
            write_text_file(cfg.out_dir / "schema.json", to_json(m.schema).dump(2) + "\n");
            std::cout << "featurized " << m.rows.size() << " traces, " << m.schema.size() << " features\n";
        } else if (*train_cmd) {
            FeatureMatrix m = parse_feature_csv(read_text_file(train_features));
            const FeatureSchema schema = feature_schema_from_json(nlohmann::json::parse(read_text_file(train_schema)));
            if (schema.names != m.schema.names) {
                throw ClassifierError{ClassifierErrorKind::SchemaMismatch, "feature CSV columns differ from the schema"};
            }
            m.schema = schema;
            const Model model = train(m, train_params);
            fs::create_directories(train_out);
            save_model(fs::path{train_out} / "model.json", model);
            std::string csv = "rank,feature,gain\n";
            std::size_t rank = 1;
            for (const auto &e : feature_importance(model)) {
                csv += std::to_string(rank++) + "," + e.feature + "," + format_number(e.gain) + "\n";
            }
            write_text_file(fs::path{train_out} / "feature_importance.csv", csv);
            std::cout << "trained " << model.trees().size() << " trees on " << m.rows.size() << " traces\n";
        } else if (*eval_cmd) {
            emit_report(run_full_experiment(eval_opts.resolve()));
        } else if (*thr_cmd) {
            ExperimentConfig cfg = thr_opts.resolve();
            cfg.thresholds = thr_list.empty() ? default_threshold_grid() : parse_list(thr_list);
            for (double t : cfg.thresholds) {
                if (t < 0.0 || t > 1.3) {
                    throw UsageError{"thresholds must lie in [0, 1.3]"};
                }
            }
            ExperimentReport report;
            report.config = cfg;
            report.fingerprint = config_fingerprint(cfg);
            report.threshold_sweep = threshold_sweep(cfg, cfg.thresholds);
            emit_report(report);
        } else if (*def_cmd) {
            if (def_trace.empty() == def_manifest.empty()) {
                throw UsageError{"defend needs exactly one of --trace or --manifest"};
            }
            DefenseConfig dc;
            if (def_padding) {
                dc.padding.x = *def_padding;
                dc.padding.validate();
            } else if (def_modulation) {
                dc.type = DefenseType::Modulation;
                if (!def_preset.empty()) {
                    dc.modulation = modulation_preset(def_preset, def_mod.s_p);
                    dc.modulation.tail_dummies = def_mod.tail_dummies;
                } else {
                    dc.modulation = def_mod;
                    if (!def_cmd->count("--L")) {
                        dc.modulation.L = dc.modulation.t_i;
                    }
                }
                dc.modulation.idle_dummies = !def_no_idle;
                dc.modulation.validate();
            } else {
                throw UsageError{"defend needs --padding X or --modulation"};
            }
            Dataset ds;
            if (!def_trace.empty()) {
                ds.traces.push_back(read_trace_file(def_trace));
            } else {
                ds = load_dataset(def_manifest);
            }
            const fs::path out{def_out};
            fs::create_directories(out / "traces");
            std::vector<std::pair<std::string, ActionLabel>> entries;
            nlohmann::json reports = nlohmann::json::object();
            for (const auto &t : ds.traces) {
                const auto [defended, report] = apply_defense(t, dc);
                const std::string file = "traces/" + t.trace_id + ".csv";
                write_trace_file(out / file, defended.trace);
                write_text_file(out / "traces" / (t.trace_id + ".provenance.json"), provenance_json(defended).dump() + "\n");
                reports[t.trace_id] = to_json(report);
                if (t.label) {
                    entries.emplace_back(file, *t.label);
                }
            }
            if (entries.size() == ds.traces.size()) {
                write_manifest(out / "manifest.csv", entries);
            }
            write_text_file(out / "defense_report.json",
                            nlohmann::json{{"defense", to_json(dc)}, {"traces", reports}}.dump(2) + "\n");
            std::cout << "defended " << ds.traces.size() << " traces with " << dc.name() << "\n";
        } else if (*sd_cmd) {
            ExperimentConfig cfg = sd_opts.resolve();
            std::vector<DefenseConfig> defenses = cfg.defenses;
            if (sd_padding) {
                for (auto &d : padding_sweep_defenses()) {
                    defenses.push_back(d);
                }
            }
            if (sd_modulation) {
                for (auto &d : modulation_sweep_defenses()) {
                    defenses.push_back(d);
                }
            }
            if (!sd_list.empty()) {
                for (const auto &d : nlohmann::json::parse(read_text_file(sd_list))) {
                    defenses.push_back(defense_config_from_json(d));
                }
            }
            if (defenses.empty()) {
                throw UsageError{"sweep-defense needs --padding-sweep, --modulation-sweep, --defenses or a config list"};
            }
            if (sd_no_retrain) {
                cfg.defense_retrain = false;
            }
            cfg.defenses = defenses;
            ExperimentReport report;
            report.config = cfg;
            report.fingerprint = config_fingerprint(cfg);
            report.defenses = run_defense_sweep(cfg, defenses);
            emit_report(report);
        } else if (*rep_cmd) {
            const auto j = nlohmann::json::parse(read_text_file(rep_input));
            if (!rep_out.empty()) {
                fs::create_directories(rep_out);
                for (const auto &[name, text] : report_csvs(j)) {
                    write_text_file(fs::path{rep_out} / name, text);
                }
            }
            std::cout << summary_table(j);
        }
    } catch (const UsageError &e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
