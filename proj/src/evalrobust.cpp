#include "tride/evalrobust.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "tride/adversary.hpp"
#include "tride/error.hpp"
#include "tride/kernels.hpp"
#include "tride/metricspace.hpp"
#include "tride/rng.hpp"

namespace tride {

namespace {

bool is_plus(AttackKind kind)
{
    return kind == AttackKind::CaPlus || kind == AttackKind::QaPlus;
}

bool is_candidate_attack(AttackKind kind)
{
    return kind == AttackKind::CaPlus || kind == AttackKind::CaMinus;
}

std::vector<double> distances_to(const Matrix& gallery, std::span<const double> query)
{
    std::vector<double> d(gallery.rows());
    for (std::size_t j = 0; j < gallery.rows(); ++j)
        d[j] = pair_distance(query, gallery.row(j));
    return d;
}

Matrix single_row(std::span<const double> values)
{
    return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

/// Adds sign * d(e, target) / d(e) into grad (zero at coincidence).
void add_distance_grad(std::span<const double> e, std::span<const double> target, double coef,
                       std::span<double> grad)
{
    const double d = pair_distance(e, target);
    if (d <= 0.0)
        return;
    for (std::size_t c = 0; c < e.size(); ++c)
        grad[c] += coef * (e[c] - target[c]) / d;
}

void sign_step(Matrix& x, const Matrix& grad, double alpha)
{
    auto xv = x.values();
    const auto gv = grad.values();
    for (std::size_t i = 0; i < xv.size(); ++i) {
        if (gv[i] > 0.0)
            xv[i] -= alpha;
        else if (gv[i] < 0.0)
            xv[i] += alpha;
    }
}

void check_finite(const Matrix& grad, const char* what)
{
    if (!grad.all_finite())
        fail(ErrorKind::Numeric, std::string("non-finite input gradient during ") + what);
}

double mean_rank(std::span<const double> distances, std::span<const std::size_t> candidates, std::size_t exclude)
{
    double sum = 0.0;
    for (std::size_t c : candidates)
        sum += static_cast<double>(rank_of(distances, c, exclude));
    return sum / static_cast<double>(candidates.size());
}

double top1_hits(const Matrix& query_emb, std::span<const std::size_t> queries, const Matrix& gallery,
                 std::span<const int> labels)
{
    std::size_t hits = 0;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const auto d = distances_to(gallery, query_emb.row(i));
        const auto order = ranked_candidates(d, queries[i]);
        if (!order.empty() && labels[order.front()] == labels[queries[i]])
            ++hits;
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(queries.size());
}

} // namespace

std::vector<std::size_t> ranked_candidates(std::span<const double> distances, std::size_t exclude)
{
    std::vector<std::size_t> order;
    order.reserve(distances.size());
    for (std::size_t j = 0; j < distances.size(); ++j)
        if (j != exclude)
            order.push_back(j);
    std::ranges::stable_sort(order, [&](std::size_t i, std::size_t j) { return distances[i] < distances[j]; });
    return order;
}

std::size_t rank_of(std::span<const double> distances, std::size_t candidate, std::size_t exclude)
{
    if (candidate >= distances.size() || candidate == exclude)
        fail(ErrorKind::Precondition, "rank_of: candidate not in the gallery");
    const double dc = distances[candidate];
    std::size_t rank = 0;
    for (std::size_t j = 0; j < distances.size(); ++j) {
        if (j == exclude || j == candidate)
            continue;
        if (distances[j] < dc || (distances[j] == dc && j < candidate))
            ++rank;
    }
    return rank;
}

double recall_at_k(const Matrix& embeddings, std::span<const int> labels, std::span<const std::size_t> queries,
                   std::size_t k)
{
    if (k < 1)
        fail(ErrorKind::Config, "recall_at_k needs k >= 1");
    if (embeddings.rows() < 2)
        fail(ErrorKind::Degenerate, "retrieval needs at least two gallery items");
    if (labels.size() != embeddings.rows())
        fail(ErrorKind::Shape, "one label per gallery item required");
    if (queries.empty())
        fail(ErrorKind::EmptyBatch, "recall_at_k without queries");
    const Matrix d = kernels::omp::distance_matrix(embeddings.gather(queries), embeddings);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const auto order = ranked_candidates(d.row(i), queries[i]);
        const std::size_t depth = std::min(k, order.size());
        for (std::size_t r = 0; r < depth; ++r)
            if (labels[order[r]] == labels[queries[i]]) {
                ++hits;
                break;
            }
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(queries.size());
}

double recall_at_k(const Matrix& embeddings, std::span<const int> labels, std::size_t k)
{
    std::vector<std::size_t> all(embeddings.rows());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return recall_at_k(embeddings, labels, all, k);
}

double recall_at_k(const EmbeddingModel& model, const Dataset& gallery, std::size_t k)
{
    return recall_at_k(forward(model, gallery.features()), gallery.labels(), k);
}

MapResult mean_average_precision(const Matrix& embeddings, std::span<const int> labels,
                                 std::span<const std::size_t> queries)
{
    if (labels.size() != embeddings.rows())
        fail(ErrorKind::Shape, "one label per gallery item required");
    if (queries.empty())
        fail(ErrorKind::EmptyBatch, "mAP without queries");
    const Matrix d = kernels::omp::distance_matrix(embeddings.gather(queries), embeddings);
    MapResult out;
    double total = 0.0;
    std::size_t counted = 0;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const auto order = ranked_candidates(d.row(i), queries[i]);
        std::size_t positives = 0;
        double precision_sum = 0.0;
        for (std::size_t r = 0; r < order.size(); ++r)
            if (labels[order[r]] == labels[queries[i]]) {
                ++positives;
                precision_sum += static_cast<double>(positives) / static_cast<double>(r + 1);
            }
        if (positives == 0) {
            ++out.skipped;
            continue;
        }
        total += precision_sum / static_cast<double>(positives);
        ++counted;
    }
    out.map = counted > 0 ? 100.0 * total / static_cast<double>(counted) : 0.0;
    return out;
}

MapResult mean_average_precision(const EmbeddingModel& model, const Dataset& gallery)
{
    std::vector<std::size_t> all(gallery.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return mean_average_precision(forward(model, gallery.features()), gallery.labels(), all);
}

BenignMetrics benign_metrics(const EmbeddingModel& model, const Dataset& gallery)
{
    const Matrix e = forward(model, gallery.features());
    std::vector<std::size_t> all(gallery.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    BenignMetrics m;
    m.recall_at_1 = recall_at_k(e, gallery.labels(), all, 1);
    m.recall_at_2 = recall_at_k(e, gallery.labels(), all, 2);
    m.map = mean_average_precision(e, gallery.labels(), all).map;
    const ClassDistances cd = class_distances(e, gallery.labels());
    m.intra = cd.intra;
    m.inter = cd.inter;
    m.entanglement = entanglement(cd.intra, cd.inter);
    return m;
}

double ars_general_raw(double initial, double result, double goal)
{
    if (goal == initial)
        fail(ErrorKind::Degenerate, "ARS undefined when the goal equals the initial value");
    return (1.0 - (result - initial) / (goal - initial)) * 100.0;
}

double ars_general(double initial, double result, double goal)
{
    return std::clamp(ars_general_raw(initial, result, goal), 0.0, 100.0);
}

double ars_ranking_paper_raw(double rank_before, double rank_after)
{
    if (!(rank_before > 0.0))
        fail(ErrorKind::Degenerate, "ranking ARS needs a positive initial rank");
    return (1.0 - std::abs(rank_before - rank_after) / rank_before) * 100.0;
}

double ars_ranking_paper(double rank_before, double rank_after)
{
    return std::clamp(ars_ranking_paper_raw(rank_before, rank_after), 0.0, 100.0);
}

double ars_recall_paper(double recall_before, double recall_after)
{
    if (!(recall_before > 0.0))
        fail(ErrorKind::Degenerate, "recall ARS needs a positive benign recall");
    return std::clamp(recall_after / recall_before * 100.0, 0.0, 100.0);
}

double overall_ars(std::span<const double> per_attack)
{
    if (per_attack.empty())
        fail(ErrorKind::EmptyBatch, "overall ARS over no attacks");
    double sum = 0.0;
    for (double v : per_attack)
        sum += v;
    return sum / static_cast<double>(per_attack.size());
}

const char* to_string(AttackKind kind) noexcept
{
    switch (kind) {
    case AttackKind::CaPlus: return "ca+";
    case AttackKind::CaMinus: return "ca-";
    case AttackKind::QaPlus: return "qa+";
    case AttackKind::QaMinus: return "qa-";
    case AttackKind::Recall: return "recall";
    }
    return "?";
}

AttackKind parse_attack(const std::string& text)
{
    for (AttackKind k : {AttackKind::CaPlus, AttackKind::CaMinus, AttackKind::QaPlus, AttackKind::QaMinus,
                         AttackKind::Recall})
        if (text == to_string(k))
            return k;
    fail(ErrorKind::Config, "unknown attack '" + text + "'");
}

AttackTrial attack_rank(const EmbeddingModel& model, const Dataset& gallery, const TrialSpec& spec,
                        const AttackConfig& cfg)
{
    if (spec.kind == AttackKind::Recall)
        fail(ErrorKind::Config, "attack_rank does not handle recall attacks");
    if (spec.candidates.empty() || (is_candidate_attack(spec.kind) && spec.candidates.size() != 1))
        fail(ErrorKind::Config, "candidate attacks take one target, query attacks at least one");
    const std::size_t n = gallery.size();
    if (spec.query >= n)
        fail(ErrorKind::Precondition, "query index out of range");
    for (std::size_t c : spec.candidates)
        if (c >= n || c == spec.query)
            fail(ErrorKind::Precondition, "candidate must be a gallery item other than the query");

    const Matrix& features = gallery.features();
    Matrix emb = forward(model, features);
    const auto d0 = distances_to(emb, emb.row(spec.query));

    AttackTrial trial;
    trial.kind = spec.kind;
    trial.query = spec.query;
    trial.targets = spec.candidates;
    trial.initial = mean_rank(d0, spec.candidates, spec.query);
    trial.goal = is_plus(spec.kind) ? 0.0 : static_cast<double>(n - 2);
    if (trial.initial == trial.goal)
        fail(ErrorKind::Degenerate, "target already at the attack goal");

    const double sign = is_plus(spec.kind) ? 1.0 : -1.0; // minimize sign * distance
    const std::size_t moving = is_candidate_attack(spec.kind) ? spec.candidates.front() : spec.query;
    const Matrix x0 = single_row(features.row(moving));
    Matrix x = x0;
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        const ForwardCache cache = forward_cached(model, x);
        Matrix up(1, emb.cols());
        if (is_candidate_attack(spec.kind)) {
            add_distance_grad(cache.output.row(0), emb.row(spec.query), sign, up.row(0));
        } else {
            const double coef = sign / static_cast<double>(spec.candidates.size());
            for (std::size_t c : spec.candidates)
                add_distance_grad(cache.output.row(0), emb.row(c), coef, up.row(0));
        }
        const GradientBundle g = backward(model, cache, up, false);
        check_finite(g.input_grads, "ranking attack");
        sign_step(x, g.input_grads, cfg.alpha);
        project_linf_box(x, x0, cfg.epsilon);
    }

    const Matrix moved = forward(model, x);
    if (is_candidate_attack(spec.kind)) {
        auto d = d0;
        d[moving] = pair_distance(emb.row(spec.query), moved.row(0));
        trial.result = static_cast<double>(rank_of(d, moving, spec.query));
    } else {
        const auto d = distances_to(emb, moved.row(0));
        trial.result = mean_rank(d, spec.candidates, spec.query);
    }
    trial.ars_raw = ars_general_raw(trial.initial, trial.result, trial.goal);
    trial.ars = std::clamp(trial.ars_raw, 0.0, 100.0);
    if (trial.initial > 0.0) {
        trial.ars_paper_raw = ars_ranking_paper_raw(trial.initial, trial.result);
        trial.ars_paper = std::clamp(trial.ars_paper_raw, 0.0, 100.0);
    }
    return trial;
}

AttackTrial attack_recall(const EmbeddingModel& model, const Dataset& gallery, std::span<const std::size_t> queries,
                          const AttackConfig& cfg)
{
    if (queries.empty())
        fail(ErrorKind::EmptyBatch, "recall attack without queries");
    const Matrix& features = gallery.features();
    const Matrix emb = forward(model, features);
    const auto& labels = gallery.labels();

    // Same-label gallery members of each query; the nearest one is re-chosen
    // at every step, so the attack ascends min_j d(f(x), e_j).
    std::vector<std::vector<std::size_t>> same_label(queries.size());
    for (std::size_t i = 0; i < queries.size(); ++i) {
        for (std::size_t j = 0; j < gallery.size(); ++j)
            if (j != queries[i] && labels[j] == labels[queries[i]])
                same_label[i].push_back(j);
        if (same_label[i].empty())
            fail(ErrorKind::Degenerate, "query class has no other gallery member");
    }
    auto nearest_same = [&](std::size_t i, std::span<const double> e) {
        std::size_t best = same_label[i].front();
        double best_d = pair_distance(e, emb.row(best));
        for (std::size_t j : same_label[i]) {
            const double d = pair_distance(e, emb.row(j));
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        return best;
    };

    AttackTrial trial;
    trial.kind = AttackKind::Recall;
    trial.targets.assign(queries.begin(), queries.end());
    trial.initial = top1_hits(emb.gather(queries), queries, emb, labels);
    trial.goal = 0.0;
    if (trial.initial == 0.0)
        fail(ErrorKind::Degenerate, "benign R@1 is zero; recall attack has nothing to lower");

    const Matrix x0 = features.gather(queries);
    Matrix x = x0;
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        const ForwardCache cache = forward_cached(model, x);
        Matrix up(x.rows(), emb.cols());
        for (std::size_t i = 0; i < queries.size(); ++i)
            add_distance_grad(cache.output.row(i), emb.row(nearest_same(i, cache.output.row(i))), -1.0, up.row(i));
        const GradientBundle g = backward(model, cache, up, false);
        check_finite(g.input_grads, "recall attack");
        sign_step(x, g.input_grads, cfg.alpha);
        project_linf_box(x, x0, cfg.epsilon);
    }

    trial.result = top1_hits(forward(model, x), queries, emb, labels);
    trial.ars_raw = ars_general_raw(trial.initial, trial.result, trial.goal);
    trial.ars = std::clamp(trial.ars_raw, 0.0, 100.0);
    trial.ars_paper_raw = trial.result / trial.initial * 100.0;
    trial.ars_paper = ars_recall_paper(trial.initial, trial.result);
    return trial;
}

AttackReport run_attack_suite(const EmbeddingModel& model, const Dataset& gallery, const AttackSuiteConfig& cfg)
{
    if (cfg.trials < 1)
        fail(ErrorKind::Config, "attack suite needs at least one trial per attack");
    if (gallery.size() < 8)
        fail(ErrorKind::Degenerate, "attack gallery too small");
    AttackReport report;
    report.attack = cfg.attack;
    report.benign = benign_metrics(model, gallery);
    const Matrix emb = forward(model, gallery.features());
    const std::size_t n = gallery.size();
    const std::size_t g = n - 1;
    const Rng root(cfg.seed);

    std::vector<double> per_attack;
    for (AttackKind kind : cfg.kinds) {
        Rng rng = root.split(static_cast<std::uint64_t>(kind) + 1);
        AttackSummary summary;
        summary.kind = kind;
        double ars_sum = 0.0, paper_sum = 0.0;

        if (kind == AttackKind::Recall) {
            std::vector<std::size_t> all(n);
            std::iota(all.begin(), all.end(), std::size_t{0});
            rng.shuffle(std::span<std::size_t>(all));
            all.resize(std::min(cfg.trials, n));
            std::ranges::sort(all);
            try {
                report.trials.push_back(attack_recall(model, gallery, all, cfg.attack));
                summary.trials = 1;
                ars_sum = report.trials.back().ars;
                paper_sum = report.trials.back().ars_paper;
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::Degenerate)
                    throw;
                ++summary.rejected;
            }
        } else {
            const std::size_t wanted = is_candidate_attack(kind) ? 1 : std::max<std::size_t>(1, cfg.qa_candidates);
            for (std::size_t t = 0; t < cfg.trials; ++t) {
                TrialSpec spec;
                spec.kind = kind;
                spec.query = static_cast<std::size_t>(rng.below(n));
                const auto d = distances_to(emb, emb.row(spec.query));
                const auto order = ranked_candidates(d, spec.query);
                std::vector<std::size_t> middle(order.begin() + static_cast<std::ptrdiff_t>(g / 4),
                                                order.begin() + static_cast<std::ptrdiff_t>((3 * g + 3) / 4));
                rng.shuffle(std::span<std::size_t>(middle));
                middle.resize(std::min(wanted, middle.size()));
                spec.candidates = middle;
                try {
                    report.trials.push_back(attack_rank(model, gallery, spec, cfg.attack));
                    ++summary.trials;
                    ars_sum += report.trials.back().ars;
                    paper_sum += report.trials.back().ars_paper;
                } catch (const Error& e) {
                    if (e.kind() != ErrorKind::Degenerate)
                        throw;
                    ++summary.rejected;
                }
            }
        }
        if (summary.trials > 0) {
            summary.ars = ars_sum / static_cast<double>(summary.trials);
            summary.ars_paper = paper_sum / static_cast<double>(summary.trials);
            per_attack.push_back(summary.ars);
        }
        report.summaries.push_back(summary);
    }
    report.overall = per_attack.empty() ? 0.0 : overall_ars(per_attack);
    return report;
}

nlohmann::ordered_json to_json(const AttackReport& report)
{
    nlohmann::ordered_json j;
    j["format_version"] = 1;
    j["attack"] = {{"epsilon", report.attack.epsilon}, {"alpha", report.attack.alpha}, {"steps", report.attack.steps}};
    j["benign"] = {{"recall_at_1", report.benign.recall_at_1},
                   {"recall_at_2", report.benign.recall_at_2},
                   {"map", report.benign.map},
                   {"intra", report.benign.intra},
                   {"inter", report.benign.inter},
                   {"entanglement", report.benign.entanglement}};
    auto trials = nlohmann::ordered_json::array();
    for (const AttackTrial& t : report.trials) {
        nlohmann::ordered_json r;
        r["kind"] = to_string(t.kind);
        r["query"] = t.query;
        r["target"] = t.targets;
        r["O_i"] = t.initial;
        r["O_r"] = t.result;
        r["O_g"] = t.goal;
        r["ARS_general"] = t.ars;
        r["ARS_general_raw"] = t.ars_raw;
        r["ARS_paper"] = t.ars_paper;
        r["ARS_paper_raw"] = t.ars_paper_raw;
        trials.push_back(std::move(r));
    }
    j["trials"] = std::move(trials);
    auto summaries = nlohmann::ordered_json::array();
    for (const AttackSummary& s : report.summaries) {
        nlohmann::ordered_json r;
        r["kind"] = to_string(s.kind);
        r["trials"] = s.trials;
        r["rejected"] = s.rejected;
        r["ARS_general"] = s.ars;
        r["ARS_paper"] = s.ars_paper;
        summaries.push_back(std::move(r));
    }
    j["summary"] = std::move(summaries);
    j["overall_ars"] = report.overall;
    return j;
}

std::string summary_csv(const AttackReport& report)
{
    auto fmt = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", v);
        return std::string(buf);
    };
    std::string header = "R@1,R@2,mAP";
    std::string row = fmt(report.benign.recall_at_1) + ',' + fmt(report.benign.recall_at_2) + ',' +
                      fmt(report.benign.map);
    for (const AttackSummary& s : report.summaries) {
        header += std::string(",") + to_string(s.kind);
        row += ',' + (s.trials > 0 ? fmt(s.ars) : std::string("nan"));
    }
    header += ",overall_ars\n";
    row += ',' + fmt(report.overall) + '\n';
    return header + row;
}

} // namespace tride
