// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "robofp/defenses.hpp"
#include "robofp/harness.hpp"
#include "robofp/rng.hpp"
#include "robofp/sigproc.hpp"

#ifndef ROBOFP_CLI
#error "ROBOFP_CLI must name the command-line binary"
#endif

using namespace robofp;
namespace fs = std::filesystem;

namespace {

// tolerances
constexpr double kMinAttackAccuracy = 0.90;
constexpr double kMaxAttackSeconds = 300.0;
constexpr double kMinAblationGap = 0.05;
constexpr double kOracleTolerance = 1e-9;
constexpr double kPeakTolerance = 1e-9;
constexpr double kTableGap = 3.3998;
constexpr double kTableGapRounding = 5e-5;
constexpr double kMaxExhaustiveSeconds = 1.0;
constexpr double kMaxModulatedAccuracy = 0.50;
constexpr double kLatencySlack = 1e-9;
constexpr double kMinPaddingDrop = 0.20;
constexpr double kDefaultThreshold = 0.9;

int failures = 0;

void report(int id, const std::string &name, bool ok, const std::string &detail) {
    std::printf("[%s] %2d %s: %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
    std::fflush(stdout);
    failures += ok ? 0 : 1;
}

void guarded(int id, const std::string &name, const std::function<void()> &fn) {
    try {
        fn();
    } catch (const std::exception &e) {
        report(id, name, false, std::string{"exception: "} + e.what());
    }
}

std::string fmt(const char *format, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char *format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof buf, format, args);
    va_end(args);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ExperimentConfig default_config() {
    ExperimentConfig cfg;
    cfg.set_seed(42);
    return cfg;
}

std::vector<double> random_vector(Rng &rng, std::size_t n) {
    std::vector<double> v(n);
    for (double &x : v) {
        x = rng.uniform(-1500.0, 1500.0);
    }
    return v;
}

std::string slurp(const fs::path &p) {
    std::ifstream in{p, std::ios::binary};
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void criterion_attack_and_ablation() {
    const ExperimentConfig cfg = default_config();
    double full = 0.0;
    guarded(1, "closed-world attack", [&] {
        const auto t0 = std::chrono::steady_clock::now();
        const ExperimentReport r = run_attack_experiment(cfg);
        const double secs = seconds_since(t0);
        full = r.cv->accuracy;
        report(1, "closed-world attack",
               r.trace_ids.size() == 200 && r.cv->folds == 10 && full >= kMinAttackAccuracy && secs <= kMaxAttackSeconds,
               fmt("%zu traces, %d folds, accuracy %.3f (>= %.2f), %.1f s (<= %.0f s)", r.trace_ids.size(),
                   r.cv->folds, full, kMinAttackAccuracy, secs, kMaxAttackSeconds));
    });
    guarded(2, "summary-only ablation", [&] {
        ExperimentConfig summary = cfg;
        summary.feature_set = FeatureSet::SummaryOnly;
        const double acc = run_attack_experiment(summary).cv->accuracy;
        const double gap = full - acc;
        report(2, "summary-only ablation", gap >= kMinAblationGap - 1e-12,
               fmt("full %.3f, summary-only %.3f, gap %.1f points (>= %.0f)", full, acc, 100 * gap,
                   100 * kMinAblationGap));
    });
}

void criterion_oracles() {
    guarded(3, "signal-processing oracles", [&] {
        Rng rng{20240607};
        double conv_err = 0.0, corr_err = 0.0, peak_err = 0.0;
        bool bounded = true;
        for (int trial = 0; trial < 1000; ++trial) {
            const auto k = static_cast<std::size_t>(rng.uniform_int(2, 16));
            const auto n = static_cast<std::size_t>(rng.uniform_int(static_cast<int>(k), 64));
            const auto x = random_vector(rng, n);
            const auto h = random_vector(rng, k);
            Signal s;
            s.values = x;
            Kernel kern;
            kern.values = h;

            // convolution: sum_j x[n - off + j] h[j] / |h|^2, zero outside the signal
            const auto conv = convolve(s, kern).values;
            double e = 0.0;
            for (double v : h) {
                e += v * v;
            }
            const long off = static_cast<long>(k - 1) - static_cast<long>(k - 1) / 2;
            for (std::size_t i = 0; i < n; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < k; ++j) {
                    const long idx = static_cast<long>(i) - off + static_cast<long>(j);
                    if (idx >= 0 && idx < static_cast<long>(n)) {
                        acc += x[static_cast<std::size_t>(idx)] * h[j];
                    }
                }
                conv_err = std::max(conv_err, std::abs(conv[i] - acc / e) / std::max(1.0, std::abs(acc / e)));
            }

            // correlation: Pearson coefficient of each window with the kernel
            const auto corr = sliding_correlation(s, kern).values;
            if (corr.size() != n - k + 1) {
                corr_err = INFINITY;
            }
            for (std::size_t m = 0; m < corr.size(); ++m) {
                double mx = 0, mh = 0;
                for (std::size_t j = 0; j < k; ++j) {
                    mx += x[m + j];
                    mh += h[j];
                }
                mx /= static_cast<double>(k);
                mh /= static_cast<double>(k);
                double sxh = 0, sxx = 0, shh = 0;
                for (std::size_t j = 0; j < k; ++j) {
                    sxh += (x[m + j] - mx) * (h[j] - mh);
                    sxx += (x[m + j] - mx) * (x[m + j] - mx);
                    shh += (h[j] - mh) * (h[j] - mh);
                }
                const double want = sxx == 0 || shh == 0 ? 0.0 : sxh / std::sqrt(sxx * shh);
                corr_err = std::max(corr_err, std::abs(corr[m] - want));
                bounded = bounded && corr[m] >= -1.0 && corr[m] <= 1.0;
            }

            // perfect match
            Signal self;
            self.values = h;
            const auto sc = convolve(self, kern).values;
            peak_err = std::max(peak_err, std::abs(*std::max_element(sc.begin(), sc.end()) - 1.0));
            peak_err = std::max(peak_err, std::abs(sliding_correlation(self, kern).values[0] - 1.0));
        }
        report(3, "signal-processing oracles",
               conv_err <= kOracleTolerance && corr_err <= kOracleTolerance && peak_err <= kPeakTolerance && bounded,
               fmt("1000 instances, max error conv %.2e corr %.2e, peak error %.2e, correlation %s [-1, 1]", conv_err,
                   corr_err, peak_err, bounded ? "within" : "outside"));
    });
}

void criterion_table() {
    guarded(4, "cluster statistics structure", [&] {
        Signal sig;
        sig.values = {0.5, 1.2, 0.1};
        ClusterSet six;
        for (double s : {0.4, 2.0, 5.5, 9.25, 13.0, 17.3991}) {
            six.clusters.push_back({s, s + 0.3, 1.1});
        }
        const auto a = cluster_statistics(six, sig);
        const double want = (17.3991 - 0.4) / 5.0;
        ClusterSet one;
        one.clusters.push_back({1.0, 3.091, 0.8});
        const auto b = cluster_statistics(one, sig);
        bool random_ok = true;
        Rng rng{4};
        for (int trial = 0; trial < 1000; ++trial) {
            ClusterSet cs;
            double at = rng.uniform(0.0, 2.0);
            const int n = rng.uniform_int(2, 12);
            for (int i = 0; i < n; ++i) {
                const double len = rng.uniform(0.01, 2.0);
                cs.clusters.push_back({at, at + len, 1.0});
                at += len + rng.uniform(0.01, 3.0);
            }
            const double expect = (cs.clusters.back().start - cs.clusters.front().start) / (n - 1);
            random_ok = random_ok && std::abs(cluster_statistics(cs, sig).avg_time_gap - expect) <= 1e-12;
        }
        const bool ok = std::abs(a.avg_time_gap - want) <= 1e-12 && std::abs(a.avg_time_gap - kTableGap) <= kTableGapRounding &&
                        b.avg_time_gap == 0.0 && b.cluster_count == 1 && random_ok;
        report(4, "cluster statistics structure", ok,
               fmt("6 clusters: 16.9991/5 = %.4f; 1 cluster: avg gap %.1f; 1000 random sets %s", a.avg_time_gap,
                   b.avg_time_gap, random_ok ? "agree" : "disagree"));
    });
}

void criterion_padding_units() {
    guarded(5, "padding rule", [&] {
        const bool cases = pad_packet(360, 2) == 400 && pad_packet(360, 5) == 500 && pad_packet(960, 8) == 1500;
        const auto t0 = std::chrono::steady_clock::now();
        bool idem = true, mono = true;
        for (int x = 1; x <= 10; ++x) {
            int prev = 0;
            for (int s = 1; s <= kMtu; ++s) {
                const int p = pad_packet(s, x);
                idem = idem && pad_packet(p, x) == p && p >= s;
                mono = mono && p >= prev;
                prev = p;
            }
        }
        const double secs = seconds_since(t0);
        report(5, "padding rule", cases && idem && mono && secs < kMaxExhaustiveSeconds,
               fmt("unit cases %s, idempotent %s, monotone %s over 15000 pairs in %.3f s", cases ? "ok" : "wrong",
                   idem ? "yes" : "no", mono ? "yes" : "no", secs));
    });
}

void criterion_segmentation() {
    guarded(6, "segmentation rule", [&] {
        // independent oracle in integer microseconds
        auto oracle = [](int s_o, int s_p, long t_us, long l_us) {
            if (s_o <= s_p) {
                return SegmentPlan{s_p, 1};
            }
            const int m = (s_o + s_p - 1) / s_p;
            const int budget = static_cast<int>(l_us / t_us);
            return m <= budget ? SegmentPlan{s_p, m} : SegmentPlan{(s_o + budget - 1) / budget, budget};
        };
        int grid = 0, grid_ok = 0;
        int branch[3] = {0, 0, 0};
        for (int s_o : {1, 150, 999, 1000, 1500}) {
            for (int s_p : {100, 500}) {
                for (auto [t_us, l_us] : {std::pair<long, long>{100, 1000}, {1000, 1000}, {500, 1000}, {100, 100},
                                          {10000, 10000}}) {
                    const auto want = oracle(s_o, s_p, t_us, l_us);
                    const auto got = segment_plan(s_o, s_p, static_cast<double>(t_us) * 1e-6,
                                                  static_cast<double>(l_us) * 1e-6);
                    ++grid;
                    grid_ok += got.s_c == want.s_c && got.n == want.n;
                    ++branch[s_o <= s_p ? 0 : (want.s_c == s_p ? 1 : 2)];
                }
            }
        }
        Rng rng{6};
        int conserved = 0;
        for (int i = 0; i < 10000; ++i) {
            const int s_o = rng.uniform_int(1, 20000);
            const int s_p = rng.uniform_int(1, 1500);
            const double t_i = rng.log_uniform(1e-5, 0.05);
            const double L = t_i * rng.uniform(1.0, 40.0);
            const auto p = segment_plan(s_o, s_p, t_i, L);
            conserved += static_cast<long>(p.n) * p.s_c >= s_o;
        }
        report(6, "segmentation rule",
               grid == 50 && grid_ok == 50 && branch[0] > 0 && branch[1] > 0 && branch[2] > 0 && conserved == 10000,
               fmt("grid %d/%d match (branches %d/%d/%d), conservation %d/10000", grid_ok, grid, branch[0], branch[1],
                   branch[2], conserved));
    });
}

void criterion_modulation() {
    guarded(7, "modulation efficacy", [&] {
        std::vector<DefenseConfig> defs;
        for (int s_p = 100; s_p <= 1000; s_p += 100) {
            DefenseConfig d;
            d.type = DefenseType::Modulation;
            d.modulation = modulation_preset("rate-100us", s_p);
            defs.push_back(d);
        }
        const auto results = run_defense_sweep(default_config(), defs);
        double worst_acc = 0.0, worst_excess = -INFINITY;
        std::string accs;
        for (const auto &r : results) {
            worst_acc = std::max(worst_acc, r.cv.accuracy);
            const auto &m = r.config.modulation;
            worst_excess = std::max(worst_excess, r.report.max_added_latency - (m.L + m.t_i));
            accs += fmt("%s%.3f", accs.empty() ? "" : " ", r.cv.accuracy);
        }
        report(7, "modulation efficacy",
               results.size() == 10 && worst_acc <= kMaxModulatedAccuracy && worst_excess <= kLatencySlack,
               fmt("t_i=1e-4, s_p 100..1000 accuracy [%s], max %.3f (<= %.2f); worst latency minus (L + t_i) %.2e s",
                   accs.c_str(), worst_acc, kMaxModulatedAccuracy, worst_excess));
    });
}

void criterion_padding_sweep() {
    guarded(8, "padding sweep trend", [&] {
        const auto results = run_defense_sweep(default_config(), padding_sweep_defenses());
        bool nondecreasing = true;
        for (std::size_t i = 1; i < results.size(); ++i) {
            nondecreasing = nondecreasing && results[i].report.bandwidth_overhead >= results[i - 1].report.bandwidth_overhead;
        }
        const double a1 = results.front().cv.accuracy, a10 = results.back().cv.accuracy;
        report(8, "padding sweep trend", results.size() == 10 && a1 - a10 >= kMinPaddingDrop && nondecreasing,
               fmt("accuracy x=1 %.3f, x=10 %.3f, drop %.1f points (>= %.0f); overhead %.3f..%.3f %s",
                   a1, a10, 100 * (a1 - a10), 100 * kMinPaddingDrop, results.front().report.bandwidth_overhead,
                   results.back().report.bandwidth_overhead, nondecreasing ? "non-decreasing" : "not monotone"));
    });
}

void criterion_reproducibility() {
    guarded(9, "reproducibility", [&] {
        const fs::path root = fs::temp_directory_path() / "robofp_acceptance";
        fs::remove_all(root);
        auto run = [&](const std::string &name) {
            const fs::path dir = root / name;
            const std::string cmd = std::string{"\""} + ROBOFP_CLI + "\" evaluate --seed 42 --out-dir \"" +
                                    dir.string() + "\" >/dev/null 2>&1";
            const int status = std::system(cmd.c_str());
            return std::pair{status, dir};
        };
        const auto [s1, d1] = run("a");
        const auto [s2, d2] = run("b");
        std::size_t files = 0;
        bool same = s1 == 0 && s2 == 0;
        if (same) {
            for (const auto &entry : fs::directory_iterator{d1}) {
                const auto name = entry.path().filename();
                if (!fs::exists(d2 / name)) {
                    same = false;
                    continue;
                }
                ++files;
                if (name == "report.json") {
                    auto a = nlohmann::json::parse(slurp(entry.path()));
                    auto b = nlohmann::json::parse(slurp(d2 / name));
                    a.erase("generated_at");
                    b.erase("generated_at");
                    same = same && a.dump() == b.dump();
                } else {
                    same = same && slurp(entry.path()) == slurp(d2 / name);
                }
            }
        }
        report(9, "reproducibility", same && files > 0,
               fmt("two evaluate runs, %zu output files %s (timestamp excluded)", files,
                   same ? "byte-identical" : "differ"));
    });
}

void criterion_thresholds() {
    guarded(10, "threshold behavior", [&] {
        const auto points = threshold_sweep(default_config(), {0.0, 0.9, 1.3});
        std::size_t violations = 0, n = points[0].cluster_counts.size();
        std::size_t sum[3] = {0, 0, 0};
        for (std::size_t i = 0; i < n; ++i) {
            violations += !(points[0].cluster_counts[i] >= points[1].cluster_counts[i] &&
                            points[1].cluster_counts[i] >= points[2].cluster_counts[i]);
            for (int k = 0; k < 3; ++k) {
                sum[k] += points[static_cast<std::size_t>(k)].cluster_counts[i];
            }
        }
        const bool default_ok = SigprocConfig{}.cartesian_threshold == kDefaultThreshold;
        report(10, "threshold behavior", violations == 0 && n == 200 && default_ok,
               fmt("%zu/%zu traces ordered; mean Cartesian clusters t=0 %.1f, t=0.9 %.1f, t=1.3 %.1f; default t %.1f",
                   n - violations, n, static_cast<double>(sum[0]) / n, static_cast<double>(sum[1]) / n,
                   static_cast<double>(sum[2]) / n, SigprocConfig{}.cartesian_threshold));
    });
}

} // namespace

int main() {
    criterion_attack_and_ablation();
    criterion_oracles();
    criterion_table();
    criterion_padding_units();
    criterion_segmentation();
    criterion_modulation();
    criterion_padding_sweep();
    criterion_reproducibility();
    criterion_thresholds();
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
