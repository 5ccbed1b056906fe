#include "tride/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "tride/dataio.hpp"
#include "tride/error.hpp"
#include "tride/evalrobust.hpp"
#include "tride/geometry.hpp"
#include "tride/kernels.hpp"
#include "tride/numcore.hpp"
#include "tride/svgplot.hpp"
#include "tride/trainer.hpp"

#ifndef TRIDE_BUILD_ID
#define TRIDE_BUILD_ID "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace tride::cli {

namespace {

constexpr const char* kManifest = "manifest.json";

std::string fingerprint(const fs::path& path)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(read_file(path))));
    return std::string("fnv1a64=") + buf;
}

void write_json(const fs::path& path, const ordered_json& j)
{
    write_file(path, j.dump(1) + "\n");
}

std::string utc_timestamp()
{
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json parse_json_file(const fs::path& path, ErrorKind kind)
{
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        fail(kind, path.string() + ": " + e.what());
    }
}

/// What a command produced; recorded in the manifest.
struct Outputs {
    json inputs = json::object();
    std::vector<std::string> files;
    std::optional<std::uint64_t> seed;

    void input(const fs::path& path) { inputs[path.string()] = fingerprint(path); }
};

fs::path prepare_out(const json& options)
{
    const fs::path out = options.at("out").get<std::string>();
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec)
        fail(ErrorKind::Io, "cannot create output directory " + out.string() + ": " + ec.message());
    return out;
}

// ---- commands ---------------------------------------------------------------

void cmd_gen_data(const json& o, Outputs& res, std::ostream& out)
{
    const fs::path dir = prepare_out(o);
    SynthSpec spec;
    spec.classes = o.at("classes").get<std::size_t>();
    spec.per_class = o.at("per_class").get<std::size_t>();
    spec.dim = o.at("dim").get<std::size_t>();
    spec.sigma = o.at("sigma").get<double>();
    spec.separation = o.at("separation").get<double>();
    spec.seed = o.at("seed").get<std::uint64_t>();
    const Dataset ds = generate_clusters(spec);
    save_csv(ds, dir / "dataset.csv");
    res.files = {"dataset.csv"};
    res.seed = spec.seed;
    out << "wrote " << ds.size() << " samples (" << ds.class_count() << " classes, dim " << ds.dim() << ") to "
        << (dir / "dataset.csv").string() << "\n";
}

void cmd_train(const json& o, Outputs& res, std::ostream& out)
{
    const fs::path dir = prepare_out(o);
    TrainConfig cfg;
    apply_config_json(cfg, o.at("config"));
    cfg.checkpoint_dir = dir;
    validate(cfg);
    const fs::path data = o.at("data").get<std::string>();
    res.input(data);
    res.seed = cfg.seed;

    const Dataset all = load_csv(data);
    const double fraction = o.at("train_fraction").get<double>();
    Dataset train = all, test = all;
    if (fraction < 1.0)
        std::tie(train, test) = split(all, fraction, cfg.seed);
    save_csv(train, dir / "train.csv");
    save_csv(test, dir / "test.csv");

    const TrainResult r = run_training(train, cfg, &test);
    save_checkpoint(r.model, dir / "model.json");
    {
        std::ostringstream log;
        write_log_jsonl(r.log, log);
        write_file(dir / "collapse_log.jsonl", log.str());
    }
    const BenignMetrics m = benign_metrics(r.model, test);
    ordered_json summary;
    summary["format_version"] = kFormatVersion;
    summary["mode"] = to_string(cfg.mode);
    summary["optimizer_updates"] = r.optimizer_updates;
    summary["perturbed_samples"] = r.perturbed_samples;
    summary["best_recall_at_1"] = r.best_recall_at_1;
    summary["test"] = {{"recall_at_1", m.recall_at_1}, {"recall_at_2", m.recall_at_2}, {"map", m.map},
                       {"entanglement", m.entanglement}};
    if (!r.log.empty())
        summary["log"] = to_json(summarize_log(r.log));
    write_json(dir / "train_summary.json", summary);

    res.files = {"train.csv", "test.csv", "model.json", "checkpoint_last.json", "collapse_log.jsonl",
                 "train_summary.json"};
    if (cfg.epochs > 0)
        res.files.insert(res.files.begin() + 4, "checkpoint_best.json");
    out << "trained " << to_string(cfg.mode) << " for " << cfg.epochs << " epochs (" << r.optimizer_updates
        << " updates); test R@1 " << m.recall_at_1 << "\n";
}

void cmd_eval(const json& o, Outputs& res, std::ostream& out)
{
    const fs::path dir = prepare_out(o);
    const fs::path model_path = o.at("model").get<std::string>();
    const fs::path data = o.at("data").get<std::string>();
    res.input(model_path);
    res.input(data);
    const EmbeddingModel model = load_checkpoint(model_path);
    const Dataset gallery = load_csv(data);
    const BenignMetrics m = benign_metrics(model, gallery);
    ordered_json j;
    j["format_version"] = kFormatVersion;
    j["recall_at_1"] = m.recall_at_1;
    j["recall_at_2"] = m.recall_at_2;
    j["map"] = m.map;
    j["intra"] = m.intra;
    j["inter"] = m.inter;
    j["entanglement"] = m.entanglement;
    write_json(dir / "metrics.json", j);
    res.files = {"metrics.json"};
    out << "R@1 " << m.recall_at_1 << "  R@2 " << m.recall_at_2 << "  mAP " << m.map << "\n";
}

void cmd_attack(const json& o, Outputs& res, std::ostream& out)
{
    const fs::path dir = prepare_out(o);
    const fs::path model_path = o.at("model").get<std::string>();
    const fs::path data = o.at("data").get<std::string>();
    res.input(model_path);
    res.input(data);
    AttackSuiteConfig cfg;
    cfg.kinds.clear();
    for (const auto& k : o.at("attacks"))
        cfg.kinds.push_back(parse_attack(k.get<std::string>()));
    cfg.trials = o.at("trials").get<std::size_t>();
    cfg.qa_candidates = o.at("qa_candidates").get<std::size_t>();
    cfg.attack.epsilon = o.at("epsilon").get<double>();
    cfg.attack.alpha = o.at("alpha").get<double>();
    cfg.attack.steps = o.at("steps").get<std::size_t>();
    cfg.seed = o.at("seed").get<std::uint64_t>();
    if (cfg.attack.epsilon < 0.0 || cfg.attack.alpha < 0.0)
        fail(ErrorKind::Config, "attack epsilon and alpha must be non-negative");
    res.seed = cfg.seed;

    const AttackReport report = run_attack_suite(load_checkpoint(model_path), load_csv(data), cfg);
    write_json(dir / "report.json", to_json(report));
    write_file(dir / "summary.csv", summary_csv(report));
    res.files = {"report.json", "summary.csv"};
    for (const AttackSummary& s : report.summaries)
        out << to_string(s.kind) << ": ARS " << s.ars << " over " << s.trials << " trials\n";
    out << "overall ARS " << report.overall << "\n";
}

void cmd_geometry_check(const json& o, Outputs& res, std::ostream& out)
{
    const fs::path dir = prepare_out(o);
    const auto thetas = o.at("thetas").get<std::vector<double>>();
    const auto rows = geometry_grid(thetas, o.at("delta_h").get<double>(), o.at("probe").get<double>());
    write_file(dir / "geometry.csv", geometry_csv(rows));
    res.files = {"geometry.csv"};
    double worst = 0.0;
    for (const GeometryRow& r : rows)
        worst = std::max(worst, r.rel_error);
    out << rows.size() << " grid rows, worst relative error " << worst << "\n";
}

void cmd_report(const json& o, Outputs& res, std::ostream& out)
{
    const fs::path dir = prepare_out(o);
    const fs::path log_path = o.at("log").get<std::string>();
    res.input(log_path);
    std::istringstream in(read_file(log_path));
    const CollapseLog log = read_log_jsonl(in);
    if (log.empty())
        fail(ErrorKind::Validation, log_path.string() + ": log has no records");

    Series sep{"trained triplets", {}, {}}, sep_clean{"clean triplets", {}, {}}, dbar{"d_bar", {}, {}};
    Series shift{"applied", {}, {}}, cap{"CAP probe", {}, {}}, anp{"ANP probe", {}, {}}, sip{"SIP probe", {}, {}};
    std::string csv = "batch,epoch,phase,d_bar,separability,separability_clean,mean_shift,probe_cap,probe_anp,"
                      "probe_sip\n";
    auto opt = [](const std::optional<double>& v) {
        if (!v)
            return std::string();
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.10g", *v);
        return std::string(buf);
    };
    for (const CollapseRecord& r : log) {
        const auto x = static_cast<double>(r.batch);
        sep.x.push_back(x);
        sep.y.push_back(r.separability);
        sep_clean.x.push_back(x);
        sep_clean.y.push_back(r.separability_clean);
        dbar.x.push_back(x);
        dbar.y.push_back(r.d_bar);
        if (r.perturbed > 0) {
            shift.x.push_back(x);
            shift.y.push_back(r.mean_shift);
        }
        if (r.probe_cap && r.probe_anp && r.probe_sip) {
            cap.x.push_back(x);
            cap.y.push_back(*r.probe_cap);
            anp.x.push_back(x);
            anp.y.push_back(*r.probe_anp);
            sip.x.push_back(x);
            sip.y.push_back(*r.probe_sip);
        }
        char buf[256];
        std::snprintf(buf, sizeof buf, "%zu,%zu,%s,%.10g,%.10g,%.10g,%.10g,", r.batch, r.epoch, r.phase.c_str(),
                      r.d_bar, r.separability, r.separability_clean, r.mean_shift);
        csv += buf + opt(r.probe_cap) + ',' + opt(r.probe_anp) + ',' + opt(r.probe_sip) + '\n';
    }

    write_file(dir / "separability.svg",
               line_chart_svg({"Separability per batch", "batch", "separability", 640, 400, true}, {sep, sep_clean}));
    write_file(dir / "d_bar.svg", line_chart_svg({"Mean pairwise distance", "batch", "d_bar"}, {dbar}));
    res.files = {"separability.svg", "d_bar.svg"};
    std::vector<Series> shifts;
    if (!shift.x.empty())
        shifts.push_back(shift);
    if (!cap.x.empty())
        shifts.insert(shifts.end(), {cap, anp, sip});
    if (!shifts.empty()) {
        write_file(dir / "shift.svg",
                   line_chart_svg({"Embedding shift per perturbed sample / d_bar", "batch", "shift"}, shifts));
        res.files.push_back("shift.svg");
    }
    write_file(dir / "report.csv", csv);
    write_json(dir / "summary.json", to_json(summarize_log(log)));
    res.files.insert(res.files.end(), {"report.csv", "summary.json"});
    out << "rendered " << log.size() << " records into " << dir.string() << "\n";
}

using Command = void (*)(const json&, Outputs&, std::ostream&);

Command lookup(const std::string& name)
{
    if (name == "gen-data")
        return cmd_gen_data;
    if (name == "train")
        return cmd_train;
    if (name == "eval")
        return cmd_eval;
    if (name == "attack")
        return cmd_attack;
    if (name == "geometry-check")
        return cmd_geometry_check;
    if (name == "report")
        return cmd_report;
    fail(ErrorKind::Config, "unknown command '" + name + "'");
}

// ---- flag parsing -------------------------------------------------------------

std::vector<double> default_thetas()
{
    const double pi = std::numbers::pi;
    return {pi / 6, pi / 4, pi / 3, pi / 2, 2 * pi / 3, 3 * pi / 4, 5 * pi / 6, pi};
}

template <class T>
void override_if(const CLI::Option* opt, const T& value, T& target)
{
    if (opt->count() > 0)
        target = value;
}

} // namespace

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, std::uint64_t fallback)
{
    if (flag)
        return *flag;
    if (const char* env = std::getenv("TRIDE_SEED")) {
        const std::string text = env;
        std::size_t used = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(text, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (text.empty() || used != text.size() || text.front() == '-')
            fail(ErrorKind::Config, "TRIDE_SEED must be a non-negative integer, got '" + text + "'");
        return v;
    }
    return fallback;
}

void execute(const std::string& command, const json& options, std::ostream& out)
{
    const Command fn = lookup(command);
    const auto start = std::chrono::steady_clock::now();
    const std::string started_at = utc_timestamp();
    Outputs res;
    fn(options, res, out);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    ordered_json m;
    m["format_version"] = kFormatVersion;
    m["command"] = command;
    m["options"] = options;
    m["seed"] = res.seed ? json(*res.seed) : json(nullptr);
    m["inputs"] = res.inputs;
    m["outputs"] = res.files;
    m["build_id"] = TRIDE_BUILD_ID;
    m["started_at"] = started_at;
    m["wall_clock_seconds"] = seconds;
    write_json(fs::path(options.at("out").get<std::string>()) / kManifest, m);
}

namespace {

void rerun(const fs::path& manifest_path, const std::optional<std::string>& out_override, std::ostream& out)
{
    const json m = parse_json_file(manifest_path, ErrorKind::Parse);
    if (!m.contains("format_version") || m.at("format_version") != kFormatVersion)
        fail(ErrorKind::Parse, manifest_path.string() + ": unsupported manifest format_version");
    json options = m.at("options");
    for (const auto& [path, print] : m.at("inputs").items()) {
        if (fingerprint(path) != print.get<std::string>())
            fail(ErrorKind::Io, "input " + path + " changed since the manifest was written");
    }
    if (out_override)
        options["out"] = *out_override;
    execute(m.at("command").get<std::string>(), options, out);
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Collapse-aware adversarial training for deep metric learning", "tride"};
    app.require_subcommand(1);
    int jobs = 0;
    app.add_option("--jobs", jobs, "OpenMP threads for the kernels (0 keeps the runtime default)")
        ->check(CLI::NonNegativeNumber);

    std::string command;
    json options;
    std::optional<std::string> rerun_out;
    fs::path rerun_manifest;

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Generate a seeded synthetic cluster dataset");
    std::string preset = "entangled";
    std::size_t k = 0, per_class = 0, dim = 0;
    double sigma = 0.0, separation = 0.0;
    std::uint64_t gen_seed = 0;
    std::string gen_out;
    gen->add_option("--preset", preset, "separated or entangled")
        ->check(CLI::IsMember({"separated", "entangled"}));
    auto* k_opt = gen->add_option("--k", k, "number of classes");
    auto* pc_opt = gen->add_option("--per-class", per_class, "samples per class");
    auto* dim_opt = gen->add_option("--dim", dim, "feature dimension");
    auto* sigma_opt = gen->add_option("--sigma", sigma, "per-coordinate cluster spread");
    auto* sep_opt = gen->add_option("--separation", separation, "expected distance between class centers");
    auto* gen_seed_opt = gen->add_option("--seed", gen_seed);
    gen->add_option("--out", gen_out, "output directory")->required();

    // train
    auto* train = app.add_subcommand("train", "Train an embedding model");
    std::string data, train_out, mode, config_path;
    std::size_t epochs = 0, batch_size = 0, bpe = 0, steps = 0;
    double lambda = 0.0, lr = 0.0, eta0 = 0.0, eps = 0.0, alpha = 0.0, train_fraction = 0.5;
    std::uint64_t train_seed = 0;
    bool probe = false, no_progressive = false;
    train->add_option("--data", data, "dataset CSV")->required();
    train->add_option("--out", train_out, "output directory")->required();
    auto* mode_opt = train->add_option("--mode", mode, "benign, sip, hm, ca-cap, ca-anp, ca-tride, cap, anp, tride");
    train->add_option("--config", config_path, "JSON file with TrainConfig fields");
    auto* epochs_opt = train->add_option("--epochs", epochs);
    auto* train_seed_opt = train->add_option("--seed", train_seed);
    auto* lambda_opt = train->add_option("--lambda", lambda, "attention factor of collapseness");
    auto* lr_opt = train->add_option("--lr", lr);
    auto* eta_opt = train->add_option("--eta0", eta0, "initial semi-hard window width");
    auto* bs_opt = train->add_option("--batch-size", batch_size);
    auto* bpe_opt = train->add_option("--batches-per-epoch", bpe, "0 derives it from the training set size");
    auto* eps_opt = train->add_option("--eps", eps);
    auto* alpha_opt = train->add_option("--alpha", alpha);
    auto* steps_opt = train->add_option("--steps", steps);
    train->add_option("--train-fraction", train_fraction, "stratified share used for training; 1 trains on all")
        ->check(CLI::Range(0.0, 1.0));
    auto* probe_opt = train->add_flag("--probe-shifts", probe, "log CA-CAP/CA-ANP/CA-SIP shifts late in training");
    auto* prog_opt = train->add_flag("--no-progressive-alpha", no_progressive);

    // eval
    auto* eval = app.add_subcommand("eval", "Benign retrieval metrics of a checkpoint");
    std::string eval_model, eval_data, eval_out;
    eval->add_option("--model", eval_model, "checkpoint JSON")->required();
    eval->add_option("--data", eval_data, "gallery CSV")->required();
    eval->add_option("--out", eval_out)->required();

    // attack
    auto* attack = app.add_subcommand("attack", "Run the adversarial ranking and recall attacks");
    std::string atk_model, atk_data, atk_out;
    std::vector<std::string> attacks = {"ca+", "ca-", "qa+", "qa-", "recall"};
    std::size_t trials = 50, qa_candidates = 1, atk_steps = 16;
    double atk_eps = 8.0 / 255.0, atk_alpha = 1.0 / 255.0;
    std::uint64_t atk_seed = 0;
    attack->add_option("--model", atk_model)->required();
    attack->add_option("--data", atk_data)->required();
    attack->add_option("--out", atk_out)->required();
    attack->add_option("--attacks", attacks)->delimiter(',')->check(CLI::IsMember({"ca+", "ca-", "qa+", "qa-", "recall"}));
    attack->add_option("--trials", trials);
    attack->add_option("--qa-candidates", qa_candidates);
    attack->add_option("--eps", atk_eps);
    attack->add_option("--alpha", atk_alpha);
    attack->add_option("--steps", atk_steps);
    auto* atk_seed_opt = attack->add_option("--seed", atk_seed);

    // geometry-check
    auto* geo = app.add_subcommand("geometry-check", "Compare closed-form shifts with the numeric oracle");
    std::string geo_out;
    double delta_h = 1.0, geo_probe = 1e-4;
    std::vector<double> thetas = default_thetas();
    geo->add_option("--out", geo_out)->required();
    geo->add_option("--delta-h", delta_h);
    geo->add_option("--probe", geo_probe, "hardness change used by the oracle");
    geo->add_option("--thetas", thetas)->delimiter(',');

    // report
    auto* rep = app.add_subcommand("report", "Render plots and CSV from a collapse log");
    std::string log_path, rep_out;
    rep->add_option("--log", log_path)->required();
    rep->add_option("--out", rep_out)->required();

    // rerun
    auto* re = app.add_subcommand("rerun", "Re-execute a command from its manifest");
    std::string re_out;
    re->add_option("manifest", rerun_manifest)->required();
    auto* re_out_opt = re->add_option("--out", re_out, "write to another directory");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? Ok : Usage;
    }

    try {
        if (jobs > 0)
            kernels::set_threads(jobs);

        if (gen->parsed()) {
            SynthSpec spec = preset == "separated" ? SynthSpec::separated(0) : SynthSpec::entangled(0);
            override_if(k_opt, k, spec.classes);
            override_if(pc_opt, per_class, spec.per_class);
            override_if(dim_opt, dim, spec.dim);
            override_if(sigma_opt, sigma, spec.sigma);
            override_if(sep_opt, separation, spec.separation);
            const auto seed = resolve_seed(gen_seed_opt->count() ? std::optional(gen_seed) : std::nullopt, 0);
            command = "gen-data";
            options = {{"out", gen_out},          {"preset", preset},       {"classes", spec.classes},
                       {"per_class", spec.per_class}, {"dim", spec.dim},   {"sigma", spec.sigma},
                       {"separation", spec.separation}, {"seed", seed}};
        } else if (train->parsed()) {
            TrainConfig cfg;
            if (!config_path.empty())
                apply_config_json(cfg, parse_json_file(config_path, ErrorKind::Config));
            cfg.seed = resolve_seed(train_seed_opt->count() ? std::optional(train_seed) : std::nullopt, cfg.seed);
            if (mode_opt->count())
                cfg.mode = parse_mode(mode);
            override_if(epochs_opt, epochs, cfg.epochs);
            override_if(lambda_opt, lambda, cfg.lambda);
            override_if(lr_opt, lr, cfg.learning_rate);
            override_if(eta_opt, eta0, cfg.eta0);
            override_if(bs_opt, batch_size, cfg.batch_size);
            override_if(bpe_opt, bpe, cfg.batches_per_epoch);
            override_if(eps_opt, eps, cfg.pgd.epsilon);
            override_if(alpha_opt, alpha, cfg.pgd.alpha);
            override_if(steps_opt, steps, cfg.pgd.max_steps);
            if (probe_opt->count())
                cfg.probe_shifts = true;
            if (prog_opt->count())
                cfg.progressive_alpha = false;
            validate(cfg);
            if (!(train_fraction > 0.0))
                fail(ErrorKind::Config, "train fraction must be positive");
            command = "train";
            options = {{"out", train_out},
                       {"data", data},
                       {"train_fraction", train_fraction},
                       {"config", config_to_json(cfg)}};
        } else if (eval->parsed()) {
            command = "eval";
            options = {{"out", eval_out}, {"model", eval_model}, {"data", eval_data}};
        } else if (attack->parsed()) {
            command = "attack";
            const auto seed = resolve_seed(atk_seed_opt->count() ? std::optional(atk_seed) : std::nullopt, 0);
            options = {{"out", atk_out},         {"model", atk_model},   {"data", atk_data},
                       {"attacks", attacks},     {"trials", trials},     {"qa_candidates", qa_candidates},
                       {"epsilon", atk_eps},     {"alpha", atk_alpha},   {"steps", atk_steps},
                       {"seed", seed}};
        } else if (geo->parsed()) {
            command = "geometry-check";
            options = {{"out", geo_out}, {"delta_h", delta_h}, {"probe", geo_probe}, {"thetas", thetas}};
        } else if (rep->parsed()) {
            command = "report";
            options = {{"out", rep_out}, {"log", log_path}};
        } else if (re->parsed()) {
            if (re_out_opt->count())
                rerun_out = re_out;
            rerun(rerun_manifest, rerun_out, out);
            return Ok;
        }
        execute(command, options, out);
        return Ok;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const json::exception& e) {
        err << "error (parse): " << e.what() << "\n";
        return IoError;
    } catch (const fs::filesystem_error& e) {
        err << "error (io): " << e.what() << "\n";
        return IoError;
    }
}

} // namespace tride::cli
