// Acceptance run: one PASS/FAIL line per criterion. Exits nonzero when any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "loss_cases.hpp"
#include "pgd_audit.hpp"
#include "tride/cli.hpp"
#include "tride/dataio.hpp"
#include "tride/evalrobust.hpp"
#include "tride/geometry.hpp"
#include "tride/metricspace.hpp"
#include "tride/trainer.hpp"

namespace {

using namespace tride;
namespace fs = std::filesystem;

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string format(const char* fmt, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, fmt, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Verdict gradient_correctness()
{
    const auto start = std::chrono::steady_clock::now();
    const oracle::LossKind kinds[] = {oracle::LossKind::Triplet, oracle::LossKind::Cap, oracle::LossKind::Anp,
                                      oracle::LossKind::Hm};
    double worst = 0.0;
    for (std::uint64_t i = 0; i < 100; ++i) {
        const oracle::LossCase c = oracle::make_case(kinds[i % 4], 1000 + i);
        worst = std::max(worst, oracle::relative_error(oracle::analytic_gradient(c), oracle::numeric_gradient(c)));
    }
    const double secs = seconds_since(start);
    return {worst < 1e-4 && secs < 60.0,
            format("100 cases, worst relative error %.2e (< 1e-4), %.1f s (< 60 s)", worst, secs)};
}

Verdict collapseness_reduction()
{
    Rng rng(77);
    std::size_t mismatches = 0;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t b = 1 + rng.below(12), d = 1 + rng.below(16);
        const Matrix a = oracle::random_matrix(b, d, rng, -1.0, 1.0);
        const Matrix p = oracle::random_matrix(b, d, rng, -1.0, 1.0);
        const Matrix n = oracle::random_matrix(b, d, rng, -1.0, 1.0);
        if (collapseness(a, p, n, 0.0) != hardness(a, p, n))
            ++mismatches;
    }
    return {mismatches == 0, format("1000 batches, %zu differ from hardness at lambda = 0", mismatches)};
}

Verdict geometry_oracle()
{
    const auto start = std::chrono::steady_clock::now();
    Rng rng(3);
    double worst = 0.0, worst_ratio = 0.0;
    for (int i = 0; i < 50; ++i) {
        const double theta = rng.uniform(0.3, std::numbers::pi);
        const double dh = rng.uniform(1e-6, 1e-3);
        double shift[3] = {};
        int m = 0;
        for (Phase phase : {Phase::CAP, Phase::ANP, Phase::SIP}) {
            const TripletGeometry g{theta, dh, phase};
            shift[m] = numeric_shift_oracle(g).shift;
            const double closed = closed_form_shift(g);
            worst = std::max(worst, std::abs(shift[m] - closed) / closed);
            ++m;
        }
        for (int k = 0; k < 2; ++k)
            worst_ratio = std::max(worst_ratio, std::abs(shift[k] / shift[2] - 2.0));
    }
    const double secs = seconds_since(start);
    return {worst < 1e-3 && worst_ratio <= 0.01 && secs < 60.0,
            format("50 cases, worst relative error %.2e (< 1e-3), worst |ratio - 2| %.2e (<= 0.01), %.2f s", worst,
                   worst_ratio, secs)};
}

/// PGD calls across phases, objectives, budgets and step schedules, on top
/// of every PGD call made by the training runs of this binary.
void exercise_pgd()
{
    const Objective objectives[] = {Objective::CollapseAware, Objective::Naive, Objective::HardnessManipulation};
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        Rng rng(seed);
        const std::size_t b = 2 + rng.below(10), dim = 4 + rng.below(12);
        const EmbeddingModel model = EmbeddingModel::initialize({dim, 32, 8}, seed);
        TripletBatch clean;
        clean.inputs_a = oracle::random_matrix(b, dim, rng, 0.0, 1.0);
        clean.inputs_p = oracle::random_matrix(b, dim, rng, 0.0, 1.0);
        clean.inputs_n = oracle::random_matrix(b, dim, rng, 0.0, 1.0);
        if (seed % 4 == 0) {
            // Saturated inputs exercise the box projection.
            for (double& v : clean.inputs_n.values())
                v = v < 0.5 ? 0.0 : 1.0;
        }
        clean.emb_a = forward(model, clean.inputs_a);
        clean.emb_p = forward(model, clean.inputs_p);
        clean.emb_n = forward(model, clean.inputs_n);
        for (Phase phase : {Phase::CAP, Phase::ANP, Phase::SIP}) {
            for (Objective objective : objectives) {
                PerturbationConfig cfg;
                cfg.phase = phase;
                cfg.objective = objective;
                cfg.epsilon = rng.uniform(0.0, 0.1);
                cfg.alpha = rng.uniform(0.001, 0.05);
                cfg.max_steps = 1 + rng.below(20);
                cfg.hm_target = rng.uniform(-0.5, 0.5);
                pgd_perturb(model, clean, cfg, rng.uniform(0.0, 50.0), rng.uniform(0.05, 1.0));
            }
        }
    }
}

Verdict budget_invariants(const oracle::BudgetAudit& audit)
{
    const auto& v = audit.violations();
    return {v.empty() && audit.checked() > 0,
            format("%zu PGD outputs audited (sweep plus all training runs), %zu violations%s%s", audit.checked(),
                   v.size(), v.empty() ? "" : ", first: ", v.empty() ? "" : v.front().c_str())};
}

struct Runs {
    Dataset train, test;
    TrainResult benign, naive, ca;
    LogSummary benign_log, naive_log, ca_log;
    double train_secs = 0.0;
};

Runs train_entangled()
{
    const auto start = std::chrono::steady_clock::now();
    Runs r;
    std::tie(r.train, r.test) = split(generate_clusters(SynthSpec::entangled(1)), 0.5, 1);
    auto run = [&](TrainMode mode) {
        TrainConfig cfg;
        cfg.mode = mode;
        cfg.epochs = 30;
        cfg.seed = 1;
        cfg.lambda = 100.0;
        cfg.probe_shifts = mode == TrainMode::CaTride;
        return run_training(r.train, cfg, &r.test);
    };
    r.benign = run(TrainMode::Benign);
    r.naive = run(TrainMode::Tride);
    r.ca = run(TrainMode::CaTride);
    r.benign_log = summarize_log(r.benign.log);
    r.naive_log = summarize_log(r.naive.log);
    r.ca_log = summarize_log(r.ca.log);
    r.train_secs = seconds_since(start);
    return r;
}

Verdict collapse_dichotomy(const Runs& r)
{
    const double base = r.benign_log.final_d_bar;
    const double naive_ratio = r.naive_log.final_d_bar / base;
    const double ca_ratio = r.ca_log.final_d_bar / base;
    const bool naive_ok = r.naive_log.late_median_separability <= 0.0 && naive_ratio <= 0.5;
    const bool ca_ok = r.ca_log.late_median_separability > 0.0 && ca_ratio >= 0.5;
    return {naive_ok && ca_ok,
            format("tride: late separability %.4f (<= 0), d_bar ratio %.3f (<= 0.5) [%s]; ca-tride: late "
                   "separability %.4f (> 0), d_bar ratio %.3f (>= 0.5) [%s]; benign d_bar %.3f; 3 runs %.0f s",
                   r.naive_log.late_median_separability, naive_ratio, naive_ok ? "ok" : "miss",
                   r.ca_log.late_median_separability, ca_ratio, ca_ok ? "ok" : "miss", base, r.train_secs)};
}

Verdict stronger_adversary(const Runs& r)
{
    const LogSummary& s = r.ca_log;
    const double cap = s.probe_cap / s.probe_sip, anp = s.probe_anp / s.probe_sip;
    return {s.probe_records > 0 && cap >= 1.2 && anp >= 1.2,
            format("over %zu late batches: CAP/SIP %.2f, ANP/SIP %.2f (each >= 1.2)", s.probe_records, cap, anp)};
}

Verdict robustness_ordering(const Runs& r)
{
    const auto start = std::chrono::steady_clock::now();
    AttackSuiteConfig cfg;
    cfg.seed = 1;
    const AttackReport benign = run_attack_suite(r.benign.model, r.test, cfg);
    const AttackReport ca = run_attack_suite(r.ca.model, r.test, cfg);
    double recall = 0.0;
    for (const AttackSummary& s : benign.summaries)
        if (s.kind == AttackKind::Recall)
            recall = s.ars;
    const double gap = ca.overall - benign.overall;
    const double secs = seconds_since(start) + r.train_secs;
    std::string per_attack;
    for (std::size_t i = 0; i < benign.summaries.size(); ++i)
        per_attack += format(" %s %.1f/%.1f", to_string(benign.summaries[i].kind), benign.summaries[i].ars,
                             ca.summaries[i].ars);
    return {gap >= 15.0 && recall <= 20.0 && secs < 600.0,
            format("overall ARS ca-tride %.1f vs benign %.1f, gap %.1f (>= 15); benign recall ARS %.1f (<= 20); "
                   "benign/ca per attack:%s; %.0f s with training (< 600 s)",
                   ca.overall, benign.overall, gap, recall, per_attack.c_str(), secs)};
}

Verdict ars_algebra()
{
    Rng rng(8);
    std::size_t failures = 0, identity_checks = 0;
    for (int t = 0; t < 10000; ++t) {
        const double oi = static_cast<double>(1 + rng.below(1000));
        double og = static_cast<double>(rng.below(1000));
        if (og == oi)
            og = oi - 1.0;
        const double orr = static_cast<double>(rng.below(1000));
        if (ars_general(oi, oi, og) != 100.0 || ars_general(oi, og, og) != 0.0)
            ++failures;
        if (orr <= oi) {
            ++identity_checks;
            if (std::abs(ars_ranking_paper(oi, orr) - ars_general(oi, orr, 0.0)) > 1e-9)
                ++failures;
        }
    }
    return {failures == 0, format("10000 triples (%zu with rank after <= rank before), %zu failures",
                                  identity_checks, failures)};
}

Verdict schedules()
{
    const double eta0 = 0.2;
    const std::size_t total = 30;
    const bool eta_ok = eta_schedule(0, total, eta0) == eta0 && eta_schedule(total, total, eta0) == 0.75 * eta0;
    const bool alpha_ok = alpha_fraction(total, total) == 1.0;
    long cap = 0, anp = 0;
    for (std::size_t b = 0; b < 1000; ++b) {
        const auto phase = phase_for_batch(TrainMode::CaTride, b);
        cap += phase == Phase::CAP;
        anp += phase == Phase::ANP;
    }
    const bool alt_ok = phase_for_batch(TrainMode::CaTride, 0) == Phase::CAP && cap + anp == 1000 &&
                        (cap - anp == 0 || cap - anp == 1);
    return {eta_ok && alpha_ok && alt_ok,
            format("eta(0) = %.17g, eta(n) = %.17g (0.75 eta0 = %.17g), alpha_fraction(n) = %g, %ld CAP / %ld ANP "
                   "over 1000 batches, batch 0 CAP",
                   eta_schedule(0, total, eta0), eta_schedule(total, total, eta0), 0.75 * eta0,
                   alpha_fraction(total, total), cap, anp)};
}

std::vector<std::string> differing_files(const fs::path& a, const fs::path& b)
{
    std::vector<std::string> out;
    for (const auto& entry : fs::directory_iterator(a)) {
        const std::string name = entry.path().filename().string();
        if (name == "manifest.json")
            continue;
        if (!fs::exists(b / name) || read_file(entry.path()) != read_file(b / name))
            out.push_back(name);
    }
    return out;
}

Verdict reproducibility()
{
    const fs::path root = fs::temp_directory_path() / "tride_acceptance_rerun";
    fs::remove_all(root);
    std::ostringstream sink;
    auto tride = [&](std::vector<std::string> args) { return cli::run(args, sink, sink); };
    const std::string data = (root / "data" / "dataset.csv").string();
    const std::string model = (root / "train" / "model.json").string();
    const std::vector<std::pair<std::string, std::vector<std::string>>> commands = {
        {"data", {"gen-data", "--k", "4", "--per-class", "16", "--dim", "12", "--seed", "5", "--out"}},
        {"train",
         {"train", "--data", data, "--mode", "ca-tride", "--epochs", "3", "--batch-size", "32", "--probe-shifts",
          "--seed", "5", "--out"}},
        {"eval", {"eval", "--model", model, "--data", data, "--out"}},
        {"attack", {"attack", "--model", model, "--data", data, "--trials", "6", "--seed", "5", "--out"}},
        {"geometry", {"geometry-check", "--out"}},
        {"report", {"report", "--log", (root / "train" / "collapse_log.jsonl").string(), "--out"}},
    };
    std::size_t files = 0;
    std::vector<std::string> problems;
    for (auto [name, args] : commands) {
        args.push_back((root / name).string());
        if (tride(args) != 0) {
            problems.push_back(name + " failed");
            continue;
        }
        const fs::path again = root / (name + "_rerun");
        if (tride({"rerun", (root / name / "manifest.json").string(), "--out", again.string()}) != 0) {
            problems.push_back(name + " rerun failed");
            continue;
        }
        for (const std::string& f : differing_files(root / name, again))
            problems.push_back(name + "/" + f);
        files += static_cast<std::size_t>(std::distance(fs::directory_iterator(root / name), fs::directory_iterator{}));
    }
    fs::remove_all(root);
    std::string detail = format("6 commands rerun from their manifests, %zu files compared", files);
    if (!problems.empty())
        detail += ", differing or failed: " + problems.front();
    return {problems.empty(), detail};
}

} // namespace

int main()
{
    oracle::BudgetAudit audit;
    audit.attach();

    Runs runs;
    bool trained = false;
    auto shared = [&]() -> const Runs& {
        if (!trained) {
            runs = train_entangled();
            trained = true;
        }
        return runs;
    };

    int failed = 0;
    auto report = [&](int id, const char* name, const Verdict& v) {
        std::printf("%s criterion %2d %s: %s\n", v.pass ? "PASS" : "FAIL", id, name, v.detail.c_str());
        std::fflush(stdout);
        failed += v.pass ? 0 : 1;
    };

    report(1, "gradient correctness", gradient_correctness());
    report(2, "collapseness reduction", collapseness_reduction());
    report(3, "geometry oracle", geometry_oracle());
    report(5, "collapse dichotomy", collapse_dichotomy(shared()));
    report(6, "stronger adversary", stronger_adversary(shared()));
    report(7, "robustness ordering", robustness_ordering(shared()));
    report(8, "ARS algebra", ars_algebra());
    report(9, "schedule endpoints", schedules());
    report(10, "reproducibility", reproducibility());
    exercise_pgd();
    audit.detach();
    report(4, "budget invariants", budget_invariants(audit));

    std::printf("%d of 10 criteria passed\n", 10 - failed);
    return failed == 0 ? 0 : 1;
}
