#include "tride/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "tride/error.hpp"
#include "tride/evalrobust.hpp"

namespace tride {

namespace {

Objective objective_for(TrainMode mode)
{
    switch (mode) {
    case TrainMode::CaCap:
    case TrainMode::CaAnp:
    case TrainMode::CaTride:
        return Objective::CollapseAware;
    case TrainMode::HmBaseline:
        return Objective::HardnessManipulation;
    default:
        return Objective::Naive;
    }
}

struct ModeName {
    TrainMode mode;
    const char* name;
};

constexpr ModeName kModeNames[] = {
    {TrainMode::Benign, "benign"}, {TrainMode::NaiveSip, "sip"},   {TrainMode::HmBaseline, "hm"},
    {TrainMode::CaCap, "ca-cap"},  {TrainMode::CaAnp, "ca-anp"},   {TrainMode::CaTride, "ca-tride"},
    {TrainMode::Cap, "cap"},       {TrainMode::Anp, "anp"},        {TrainMode::Tride, "tride"},
};

void add_scaled(Matrix& into, const Matrix& add, double k)
{
    auto dst = into.values();
    const auto src = add.values();
    for (std::size_t i = 0; i < dst.size(); ++i)
        dst[i] += k * src[i];
}

Matrix slice_rows(const Matrix& m, std::size_t begin, std::size_t count)
{
    std::vector<double> data(m.storage().begin() + static_cast<std::ptrdiff_t>(begin * m.cols()),
                             m.storage().begin() + static_cast<std::ptrdiff_t>((begin + count) * m.cols()));
    return Matrix(count, m.cols(), std::move(data));
}

/// Mean perturbation shift of one CA probe, normalized by d_bar.
double probe_shift(const EmbeddingModel& model, const TripletBatch& clean, const TrainConfig& cfg, Phase phase,
                   double epoch_fraction, double d_bar)
{
    PerturbationConfig p = cfg.pgd;
    p.phase = phase;
    p.objective = Objective::CollapseAware;
    return pgd_perturb(model, clean, p, cfg.lambda, epoch_fraction).mean_shift() / d_bar;
}

} // namespace

const char* to_string(TrainMode mode) noexcept
{
    for (const auto& m : kModeNames)
        if (m.mode == mode)
            return m.name;
    return "?";
}

TrainMode parse_mode(const std::string& text)
{
    for (const auto& m : kModeNames)
        if (text == m.name)
            return m.mode;
    fail(ErrorKind::Config, "unknown training mode '" + text + "'");
}

nlohmann::json config_to_json(const TrainConfig& cfg)
{
    return {
        {"epochs", cfg.epochs},
        {"batch_size", cfg.batch_size},
        {"learning_rate", cfg.learning_rate},
        {"eta0", cfg.eta0},
        {"lambda", cfg.lambda},
        {"mode", to_string(cfg.mode)},
        {"progressive_alpha", cfg.progressive_alpha},
        {"seed", cfg.seed},
        {"hidden", cfg.hidden},
        {"embedding_dim", cfg.embedding_dim},
        {"batches_per_epoch", cfg.batches_per_epoch},
        {"margin", cfg.metric.margin},
        {"hinge", cfg.metric.hinge},
        {"epsilon", cfg.pgd.epsilon},
        {"alpha", cfg.pgd.alpha},
        {"pgd_steps", cfg.pgd.max_steps},
        {"gamma", cfg.pgd.gamma},
        {"beta_tr", cfg.pgd.margin_toprank},
        {"hm_target", cfg.pgd.hm_target},
        {"probe_shifts", cfg.probe_shifts},
        {"probe_from", cfg.probe_from},
    };
}

void apply_config_json(TrainConfig& cfg, const nlohmann::json& j)
{
    if (!j.is_object())
        fail(ErrorKind::Config, "training config must be a JSON object");
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "epochs") cfg.epochs = value.get<std::size_t>();
            else if (key == "batch_size") cfg.batch_size = value.get<std::size_t>();
            else if (key == "learning_rate") cfg.learning_rate = value.get<double>();
            else if (key == "eta0") cfg.eta0 = value.get<double>();
            else if (key == "lambda") cfg.lambda = value.get<double>();
            else if (key == "mode") cfg.mode = parse_mode(value.get<std::string>());
            else if (key == "progressive_alpha") cfg.progressive_alpha = value.get<bool>();
            else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
            else if (key == "hidden") cfg.hidden = value.get<std::vector<std::size_t>>();
            else if (key == "embedding_dim") cfg.embedding_dim = value.get<std::size_t>();
            else if (key == "batches_per_epoch") cfg.batches_per_epoch = value.get<std::size_t>();
            else if (key == "margin") cfg.metric.margin = value.get<double>();
            else if (key == "hinge") cfg.metric.hinge = value.get<bool>();
            else if (key == "epsilon") cfg.pgd.epsilon = value.get<double>();
            else if (key == "alpha") cfg.pgd.alpha = value.get<double>();
            else if (key == "pgd_steps") cfg.pgd.max_steps = value.get<std::size_t>();
            else if (key == "gamma") cfg.pgd.gamma = value.get<double>();
            else if (key == "beta_tr") cfg.pgd.margin_toprank = value.get<double>();
            else if (key == "hm_target") cfg.pgd.hm_target = value.get<double>();
            else if (key == "probe_shifts") cfg.probe_shifts = value.get<bool>();
            else if (key == "probe_from") cfg.probe_from = value.get<double>();
            else fail(ErrorKind::Config, "unknown training config field '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Config, std::string("training config: ") + e.what());
    }
}

void validate(const TrainConfig& cfg)
{
    if (cfg.batch_size < 2)
        fail(ErrorKind::Config, "batch_size must be at least 2");
    if (!(cfg.eta0 > 0.0))
        fail(ErrorKind::Config, "eta0 must be positive");
    if (!(cfg.lambda >= 0.0))
        fail(ErrorKind::Config, "lambda must be non-negative");
    if (!(cfg.metric.margin > 0.0))
        fail(ErrorKind::Config, "triplet margin must be positive");
    if (!(cfg.learning_rate > 0.0))
        fail(ErrorKind::Config, "learning_rate must be positive");
    if (!(cfg.pgd.epsilon >= 0.0) || !(cfg.pgd.alpha > 0.0) || cfg.pgd.max_steps < 1)
        fail(ErrorKind::Config, "PGD needs epsilon >= 0, alpha > 0 and at least one step");
    if (cfg.embedding_dim < 1 || std::ranges::any_of(cfg.hidden, [](std::size_t h) { return h == 0; }))
        fail(ErrorKind::Config, "layer sizes must be positive");
}

nlohmann::ordered_json to_json(const CollapseRecord& r)
{
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["batch"] = r.batch;
    j["phase"] = r.phase;
    j["d_bar"] = r.d_bar;
    j["separability"] = r.separability;
    j["hardness"] = r.hardness;
    j["collapseness"] = r.collapseness;
    j["mean_shift"] = r.mean_shift;
    j["loss"] = r.loss;
    j["separability_clean"] = r.separability_clean;
    j["fallback"] = r.fallback;
    j["perturbed"] = r.perturbed;
    j["pgd_steps"] = r.pgd_steps;
    if (r.probe_cap) j["probe_cap"] = *r.probe_cap;
    if (r.probe_anp) j["probe_anp"] = *r.probe_anp;
    if (r.probe_sip) j["probe_sip"] = *r.probe_sip;
    return j;
}

CollapseRecord record_from_json(const nlohmann::json& j)
{
    CollapseRecord r;
    r.epoch = j.at("epoch").get<std::size_t>();
    r.batch = j.at("batch").get<std::size_t>();
    r.phase = j.at("phase").get<std::string>();
    r.d_bar = j.at("d_bar").get<double>();
    r.separability = j.at("separability").get<double>();
    r.hardness = j.at("hardness").get<double>();
    r.collapseness = j.at("collapseness").get<double>();
    r.mean_shift = j.at("mean_shift").get<double>();
    r.loss = j.at("loss").get<double>();
    r.separability_clean = j.value("separability_clean", 0.0);
    r.fallback = j.value("fallback", std::size_t{0});
    r.perturbed = j.value("perturbed", std::size_t{0});
    r.pgd_steps = j.value("pgd_steps", std::size_t{0});
    if (j.contains("probe_cap")) r.probe_cap = j["probe_cap"].get<double>();
    if (j.contains("probe_anp")) r.probe_anp = j["probe_anp"].get<double>();
    if (j.contains("probe_sip")) r.probe_sip = j["probe_sip"].get<double>();
    return r;
}

void write_log_jsonl(const CollapseLog& log, std::ostream& out)
{
    for (const CollapseRecord& r : log)
        out << to_json(r).dump() << '\n';
}

CollapseLog read_log_jsonl(std::istream& in)
{
    CollapseLog log;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty())
            continue;
        try {
            log.push_back(record_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::Parse, "collapse log line " + std::to_string(number) + ": " + e.what());
        }
    }
    return log;
}

double eta_schedule(std::size_t epoch, std::size_t total_epochs, double eta0)
{
    if (total_epochs == 0)
        fail(ErrorKind::Config, "eta schedule needs total_epochs > 0");
    if (epoch > total_epochs)
        fail(ErrorKind::Precondition, "epoch beyond total_epochs");
    const double ratio = static_cast<double>(epoch) / (2.0 * static_cast<double>(total_epochs));
    return eta0 * (1.0 - ratio * ratio);
}

double alpha_fraction(std::size_t epoch, std::size_t total_epochs, bool enabled)
{
    if (!enabled)
        return 1.0;
    if (total_epochs == 0 || epoch < 1 || epoch > total_epochs)
        fail(ErrorKind::Precondition, "alpha_fraction needs 1 <= epoch <= total_epochs");
    return static_cast<double>(epoch) / static_cast<double>(total_epochs);
}

std::optional<Phase> phase_for_batch(TrainMode mode, std::size_t global_batch)
{
    switch (mode) {
    case TrainMode::Benign: return std::nullopt;
    case TrainMode::NaiveSip:
    case TrainMode::HmBaseline: return Phase::SIP;
    case TrainMode::CaCap:
    case TrainMode::Cap: return Phase::CAP;
    case TrainMode::CaAnp:
    case TrainMode::Anp: return Phase::ANP;
    case TrainMode::CaTride:
    case TrainMode::Tride: return global_batch % 2 == 0 ? Phase::CAP : Phase::ANP;
    }
    return std::nullopt;
}

NegativeChoice select_semi_hard_negative(double d_ap, std::span<const double> negative_distances, double eta,
                                         Rng& rng)
{
    if (negative_distances.empty())
        fail(ErrorKind::Sampling, "no negative candidates");
    if (!(eta > 0.0))
        fail(ErrorKind::Config, "semi-hard window eta must be positive");
    std::vector<std::size_t> window;
    for (std::size_t j = 0; j < negative_distances.size(); ++j)
        if (negative_distances[j] > d_ap && negative_distances[j] < d_ap + eta)
            window.push_back(j);
    if (!window.empty())
        return {window[static_cast<std::size_t>(rng.below(window.size()))], false};

    std::optional<std::size_t> nearest_beyond;
    std::size_t farthest = 0;
    for (std::size_t j = 0; j < negative_distances.size(); ++j) {
        const double d = negative_distances[j];
        if (d > d_ap && (!nearest_beyond || d < negative_distances[*nearest_beyond]))
            nearest_beyond = j;
        if (d > negative_distances[farthest])
            farthest = j;
    }
    return {nearest_beyond.value_or(farthest), true};
}

SampledTriplets semi_hard_sample(const Matrix& embeddings, std::span<const int> labels, double eta,
                                 std::size_t batch_size, Rng& rng)
{
    if (labels.size() != embeddings.rows())
        fail(ErrorKind::Shape, "semi_hard_sample: one label per embedding required");
    if (batch_size < 1)
        fail(ErrorKind::Config, "batch size must be positive");
    std::vector<std::pair<int, std::vector<std::size_t>>> classes;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto it = std::ranges::find_if(classes, [&](const auto& c) { return c.first == labels[i]; });
        if (it == classes.end())
            classes.push_back({labels[i], {i}});
        else
            it->second.push_back(i);
    }
    std::ranges::sort(classes, {}, &std::pair<int, std::vector<std::size_t>>::first);
    if (classes.size() < 2)
        fail(ErrorKind::Sampling, "semi-hard sampling needs at least 2 classes");
    for (const auto& [label, members] : classes)
        if (members.size() < 2)
            fail(ErrorKind::Sampling, "class " + std::to_string(label) + " has fewer than 2 samples");

    SampledTriplets out;
    std::vector<std::size_t> order(classes.size());
    for (std::size_t c = 0; c < order.size(); ++c)
        order[c] = c;
    std::size_t cursor = order.size();
    std::vector<double> neg_dist;
    std::vector<std::size_t> neg_index;

    while (out.anchors.size() < batch_size) {
        if (cursor == order.size()) {
            rng.shuffle(std::span<std::size_t>(order));
            cursor = 0;
        }
        const auto& members = classes[order[cursor++]].second;
        const int label = classes[order[cursor - 1]].first;
        const std::size_t first = static_cast<std::size_t>(rng.below(members.size()));
        std::size_t second = static_cast<std::size_t>(rng.below(members.size() - 1));
        if (second >= first)
            ++second;
        const std::size_t pair[2] = {members[first], members[second]};

        for (int orient = 0; orient < 2 && out.anchors.size() < batch_size; ++orient) {
            const std::size_t anchor = pair[orient];
            const std::size_t positive = pair[1 - orient];
            const double d_ap = pair_distance(embeddings.row(anchor), embeddings.row(positive));
            neg_dist.clear();
            neg_index.clear();
            for (std::size_t j = 0; j < labels.size(); ++j)
                if (labels[j] != label) {
                    neg_index.push_back(j);
                    neg_dist.push_back(pair_distance(embeddings.row(anchor), embeddings.row(j)));
                }
            const NegativeChoice choice = select_semi_hard_negative(d_ap, neg_dist, eta, rng);
            out.anchors.push_back(anchor);
            out.positives.push_back(positive);
            out.negatives.push_back(neg_index[choice.index]);
            out.fallback += choice.fallback ? 1 : 0;
        }
    }
    return out;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr)
{
    if (params.size() != grads.size())
        fail(ErrorKind::Shape, "adam_step: gradient length does not match parameters");
    if (state.m.empty() && state.v.empty() && state.t == 0) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (state.m.size() != params.size() || state.v.size() != params.size())
        fail(ErrorKind::Shape, "adam_step: optimizer state does not match parameters");
    ++state.t;
    const double t = static_cast<double>(state.t);
    const double correction1 = 1.0 - std::pow(state.beta1, t);
    const double correction2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        const double m_hat = state.m[i] / correction1;
        const double v_hat = state.v[i] / correction2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
}

TripletBatch make_batch(const EmbeddingModel& model, const Matrix& features, const SampledTriplets& t)
{
    TripletBatch batch;
    batch.anchors = t.anchors;
    batch.positives = t.positives;
    batch.negatives = t.negatives;
    batch.inputs_a = features.gather(t.anchors);
    batch.inputs_p = features.gather(t.positives);
    batch.inputs_n = features.gather(t.negatives);
    batch.emb_a = forward(model, batch.inputs_a);
    batch.emb_p = forward(model, batch.inputs_p);
    batch.emb_n = forward(model, batch.inputs_n);
    batch.original_a = batch.inputs_a;
    batch.emb_original_a = batch.emb_a;
    return batch;
}

CollapseRecord train_step(EmbeddingModel& model, AdamState& adam, const TripletBatch& clean, const TrainConfig& cfg,
                          std::optional<Phase> phase, const StepContext& ctx)
{
    const std::size_t b = clean.size();
    if (b == 0)
        fail(ErrorKind::EmptyBatch, "train_step on an empty batch");

    CollapseRecord rec;
    rec.epoch = ctx.epoch;
    rec.batch = ctx.global_batch;
    rec.phase = phase ? to_string(*phase) : "clean";

    const Matrix* clean_parts[3] = {&clean.emb_a, &clean.emb_p, &clean.emb_n};
    rec.d_bar = mean_pairwise_distance(vstack(clean_parts));
    rec.hardness = hardness(clean);
    rec.collapseness = collapseness(clean, cfg.lambda);
    const double d_norm = rec.d_bar > 0.0 ? rec.d_bar : 1.0;
    rec.separability_clean = (batch_distance(clean.emb_a, clean.emb_n) - batch_distance(clean.emb_a, clean.emb_p)) /
                             d_norm;

    if (ctx.probe) {
        rec.probe_cap = probe_shift(model, clean, cfg, Phase::CAP, ctx.epoch_fraction, d_norm);
        rec.probe_anp = probe_shift(model, clean, cfg, Phase::ANP, ctx.epoch_fraction, d_norm);
        rec.probe_sip = probe_shift(model, clean, cfg, Phase::SIP, ctx.epoch_fraction, d_norm);
    }

    const TripletBatch* trained = &clean;
    PerturbationResult perturbed;
    if (phase) {
        PerturbationConfig pcfg = cfg.pgd;
        pcfg.phase = *phase;
        pcfg.objective = objective_for(cfg.mode);
        perturbed = pgd_perturb(model, clean, pcfg, cfg.lambda, ctx.epoch_fraction);
        trained = &perturbed.batch;
        rec.mean_shift = perturbed.mean_shift() / d_norm;
        rec.perturbed = perturbed.shifts.size();
        rec.pgd_steps = perturbed.steps_taken;
    }

    const Matrix* input_parts[3] = {&trained->inputs_a, &trained->inputs_p, &trained->inputs_n};
    const ForwardCache cache = forward_cached(model, vstack(input_parts));
    const Matrix ea = slice_rows(cache.output, 0, b);
    const Matrix ep = slice_rows(cache.output, b, b);
    const Matrix en = slice_rows(cache.output, 2 * b, b);

    TripletGradient loss = triplet_loss_grad(ea, ep, en, cfg.metric);
    if (phase == Phase::ANP) {
        // Top-rank triplet: gamma (d(A, P_top) - d(A, N_top) + beta_TR), membership fixed.
        const TopRankSplit top = top_rank_split(ea, ep, en);
        const PairGradient to_pos = subset_distance_grad(ea, ep, top.positives);
        const PairGradient to_neg = subset_distance_grad(ea, en, top.negatives);
        const double gamma = cfg.pgd.gamma;
        loss.value += gamma * (to_pos.value - to_neg.value + cfg.pgd.margin_toprank);
        add_scaled(loss.a, to_pos.x, gamma);
        add_scaled(loss.a, to_neg.x, -gamma);
        add_scaled(loss.p, to_pos.y, gamma);
        add_scaled(loss.n, to_neg.y, -gamma);
    }
    rec.loss = loss.value;
    rec.separability = (batch_distance(ea, en) - batch_distance(ea, ep)) / d_norm;
    if (!std::isfinite(loss.value))
        fail(ErrorKind::Numeric, "non-finite training loss at batch " + std::to_string(ctx.global_batch));

    const Matrix* grad_parts[3] = {&loss.a, &loss.p, &loss.n};
    const GradientBundle grads = backward(model, cache, vstack(grad_parts), true);
    std::vector<double> params = flatten_parameters(model);
    const std::vector<double> flat_grads = flatten_parameters(grads.param_grads);
    if (!std::ranges::all_of(flat_grads, [](double g) { return std::isfinite(g); }))
        fail(ErrorKind::Numeric, "non-finite parameter gradient at batch " + std::to_string(ctx.global_batch));
    adam_step(params, flat_grads, adam, cfg.learning_rate);
    assign_parameters(model, params);
    return rec;
}

std::size_t batches_per_epoch(std::size_t train_size, const TrainConfig& cfg)
{
    if (cfg.batches_per_epoch > 0)
        return cfg.batches_per_epoch;
    const std::size_t pairs = (cfg.batch_size + 1) / 2;
    return std::max<std::size_t>(1, (train_size + pairs - 1) / pairs);
}

TrainResult run_training(const Dataset& train, const TrainConfig& cfg, const Dataset* eval)
{
    validate(cfg);
    std::vector<std::size_t> dims{train.dim()};
    dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
    dims.push_back(cfg.embedding_dim);

    TrainResult result;
    result.model = EmbeddingModel::initialize(dims, cfg.seed);
    result.best_model = result.model;
    if (cfg.epochs == 0) {
        if (!cfg.checkpoint_dir.empty()) {
            const auto last = cfg.checkpoint_dir / "checkpoint_last.json";
            save_checkpoint(result.model, last);
            result.checkpoints.push_back(last);
        }
        return result;
    }

    Rng sampler = Rng(cfg.seed).split(0x5eed);
    AdamState adam;
    const Dataset& selection = eval != nullptr ? *eval : train;
    const std::size_t per_epoch = batches_per_epoch(train.size(), cfg);
    const std::size_t total_batches = per_epoch * cfg.epochs;
    const auto probe_start = static_cast<std::size_t>(std::ceil(cfg.probe_from * static_cast<double>(total_batches)));
    std::string last_good = "initial model (no checkpoint written yet)";

    std::size_t global = 0;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const double eta = eta_schedule(epoch - 1, cfg.epochs, cfg.eta0);
        StepContext ctx;
        ctx.epoch = epoch;
        ctx.epoch_fraction = alpha_fraction(epoch, cfg.epochs, cfg.progressive_alpha);
        for (std::size_t b = 0; b < per_epoch; ++b, ++global) {
            const Matrix embeddings = forward(result.model, train.features());
            const SampledTriplets triplets = semi_hard_sample(embeddings, train.labels(), eta, cfg.batch_size, sampler);
            const TripletBatch batch = make_batch(result.model, train.features(), triplets);
            ctx.global_batch = global;
            ctx.probe = cfg.probe_shifts && global >= probe_start;
            CollapseRecord rec;
            try {
                rec = train_step(result.model, adam, batch, cfg, phase_for_batch(cfg.mode, global), ctx);
            } catch (const Error& e) {
                if (e.kind() == ErrorKind::Numeric)
                    fail(ErrorKind::Numeric, std::string(e.what()) + "; last good checkpoint: " + last_good);
                throw;
            }
            rec.fallback = triplets.fallback;
            result.perturbed_samples += rec.perturbed;
            ++result.optimizer_updates;
            result.log.push_back(std::move(rec));
        }

        const double r1 = recall_at_k(result.model, selection, 1);
        if (r1 > result.best_recall_at_1) {
            result.best_recall_at_1 = r1;
            result.best_model = result.model;
        }
        if (!cfg.checkpoint_dir.empty()) {
            const auto last = cfg.checkpoint_dir / "checkpoint_last.json";
            const auto best = cfg.checkpoint_dir / "checkpoint_best.json";
            save_checkpoint(result.model, last);
            save_checkpoint(result.best_model, best);
            if (epoch == 1) {
                result.checkpoints.push_back(last);
                result.checkpoints.push_back(best);
            }
            last_good = last.string() + " (epoch " + std::to_string(epoch) + ")";
        } else {
            last_good = "in-memory model after epoch " + std::to_string(epoch);
        }
    }
    return result;
}

namespace {

double median(std::vector<double> values)
{
    if (values.empty())
        return 0.0;
    std::ranges::sort(values);
    const std::size_t mid = values.size() / 2;
    return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

} // namespace

LogSummary summarize_log(const CollapseLog& log, double late_fraction)
{
    if (log.empty())
        fail(ErrorKind::EmptyBatch, "collapse log has no records");
    if (!(late_fraction > 0.0 && late_fraction <= 1.0))
        fail(ErrorKind::Config, "late fraction must lie in (0, 1]");
    LogSummary s;
    s.records = log.size();
    std::size_t first = log.front().epoch;
    for (const CollapseRecord& r : log) {
        s.epochs = std::max(s.epochs, r.epoch);
        first = std::min(first, r.epoch);
    }
    const auto late_count =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(static_cast<double>(s.epochs) * late_fraction - 1e-9)));
    const std::size_t late_after = s.epochs > late_count ? s.epochs - late_count : 0;

    std::vector<double> sep, sep_clean;
    double d_first = 0.0, d_last = 0.0;
    std::size_t n_first = 0, n_last = 0, nonpositive = 0;
    for (const CollapseRecord& r : log) {
        if (r.epoch == first) {
            d_first += r.d_bar;
            ++n_first;
        }
        if (r.epoch == s.epochs) {
            d_last += r.d_bar;
            ++n_last;
        }
        if (r.epoch <= late_after)
            continue;
        sep.push_back(r.separability);
        sep_clean.push_back(r.separability_clean);
        if (r.separability <= 0.0)
            ++nonpositive;
        if (r.probe_cap && r.probe_anp && r.probe_sip) {
            s.probe_cap += *r.probe_cap;
            s.probe_anp += *r.probe_anp;
            s.probe_sip += *r.probe_sip;
            ++s.probe_records;
        }
    }
    s.late_median_separability = median(sep);
    s.late_median_separability_clean = median(sep_clean);
    s.late_fraction_nonpositive = static_cast<double>(nonpositive) / static_cast<double>(sep.size());
    s.initial_d_bar = d_first / static_cast<double>(n_first);
    s.final_d_bar = d_last / static_cast<double>(n_last);
    if (s.probe_records > 0) {
        const auto n = static_cast<double>(s.probe_records);
        s.probe_cap /= n;
        s.probe_anp /= n;
        s.probe_sip /= n;
    }
    return s;
}

nlohmann::ordered_json to_json(const LogSummary& s)
{
    nlohmann::ordered_json j;
    j["records"] = s.records;
    j["epochs"] = s.epochs;
    j["late_median_separability"] = s.late_median_separability;
    j["late_median_separability_clean"] = s.late_median_separability_clean;
    j["late_fraction_nonpositive"] = s.late_fraction_nonpositive;
    j["initial_d_bar"] = s.initial_d_bar;
    j["final_d_bar"] = s.final_d_bar;
    j["probe_records"] = s.probe_records;
    if (s.probe_records > 0) {
        j["probe_shift_cap"] = s.probe_cap;
        j["probe_shift_anp"] = s.probe_anp;
        j["probe_shift_sip"] = s.probe_sip;
    }
    return j;
}

} // namespace tride
