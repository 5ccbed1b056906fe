#include "tride/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "tride/error.hpp"

namespace tride {

namespace {

Matrix zeros_like(const Matrix& m)
{
    return Matrix(m.rows(), m.cols());
}

void scale(Matrix& m, double k)
{
    for (double& v : m.values())
        v *= k;
}

void add_scaled(Matrix& into, const Matrix& add, double k)
{
    auto dst = into.values();
    const auto src = add.values();
    for (std::size_t i = 0; i < dst.size(); ++i)
        dst[i] += k * src[i];
}

TripletGradient zero_gradient(const Matrix& a, const Matrix& p, const Matrix& n)
{
    return {0.0, zeros_like(a), zeros_like(p), zeros_like(n)};
}

std::vector<std::size_t> closest_half(const std::vector<double>& d)
{
    std::vector<std::size_t> order(d.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::ranges::stable_sort(order, [&](std::size_t i, std::size_t j) { return d[i] < d[j]; });
    order.resize((d.size() + 1) / 2);
    std::ranges::sort(order);
    return order;
}

void require_snapshot(const TripletBatch& batch)
{
    if (batch.emb_original_a.rows() != batch.emb_a.rows() || batch.emb_original_a.empty())
        fail(ErrorKind::State, "top-rank term needs the unperturbed anchor snapshot");
}

bool is_target(Phase phase, int member)
{
    switch (phase) {
    case Phase::ANP: return member == 0;
    case Phase::CAP: return member != 0;
    case Phase::SIP: return true;
    }
    return false;
}

} // namespace

const char* to_string(Phase phase) noexcept
{
    switch (phase) {
    case Phase::CAP: return "CAP";
    case Phase::ANP: return "ANP";
    case Phase::SIP: return "SIP";
    }
    return "?";
}

Phase parse_phase(const std::string& text)
{
    if (text == "CAP" || text == "cap")
        return Phase::CAP;
    if (text == "ANP" || text == "anp")
        return Phase::ANP;
    if (text == "SIP" || text == "sip")
        return Phase::SIP;
    fail(ErrorKind::Config, "unknown phase '" + text + "'");
}

double PerturbationResult::mean_shift() const
{
    if (shifts.empty())
        return 0.0;
    double sum = 0.0;
    for (double s : shifts)
        sum += s;
    return sum / static_cast<double>(shifts.size());
}

TopRankSplit top_rank_split(const Matrix& a, const Matrix& p, const Matrix& n)
{
    return {closest_half(aligned_distances(a, p)), closest_half(aligned_distances(a, n))};
}

TopRankSplit top_rank_split(const TripletBatch& batch)
{
    return top_rank_split(batch.emb_a, batch.emb_p, batch.emb_n);
}

TripletGradient cap_loss_grad(const Matrix& a, const Matrix& p, const Matrix& n, double lambda)
{
    TripletGradient c = collapseness_grad(a, p, n, lambda);
    if (-c.value <= 0.0)
        return zero_gradient(a, p, n);
    c.value = -c.value;
    scale(c.a, -1.0);
    scale(c.p, -1.0);
    scale(c.n, -1.0);
    return c;
}

TripletGradient delta_tr_grad(const Matrix& a, const Matrix& p, const Matrix& n, const Matrix& a0,
                              double lambda)
{
    if (a0.rows() != a.rows() || a0.cols() != a.cols())
        fail(ErrorKind::State, "top-rank term needs the unperturbed anchor snapshot");
    const TopRankSplit top = top_rank_split(a, p, n);
    const PairGradient to_neg = subset_distance_grad(a, n, top.negatives);
    const PairGradient drift = batch_distance_grad(a, a0);
    const TripletGradient c = collapseness_grad(a, p, n, lambda);

    const double factor = std::exp(std::max(c.value, 0.0));
    const double base = to_neg.value - drift.value;
    TripletGradient g{factor * base, zeros_like(a), zeros_like(p), zeros_like(n)};
    add_scaled(g.a, to_neg.x, factor);
    add_scaled(g.a, drift.x, -factor);
    add_scaled(g.n, to_neg.y, factor);
    if (c.value > 0.0) {
        add_scaled(g.a, c.a, g.value);
        add_scaled(g.p, c.p, g.value);
        add_scaled(g.n, c.n, g.value);
    }
    return g;
}

TripletGradient anp_loss_grad(const Matrix& a, const Matrix& p, const Matrix& n, const Matrix& a0,
                              double lambda)
{
    const TripletGradient c = collapseness_grad(a, p, n, lambda);
    TripletGradient t = delta_tr_grad(a, p, n, a0, lambda);
    const double value = -c.value + t.value;
    if (value <= 0.0)
        return zero_gradient(a, p, n);
    t.value = value;
    add_scaled(t.a, c.a, -1.0);
    add_scaled(t.p, c.p, -1.0);
    add_scaled(t.n, c.n, -1.0);
    return t;
}

TripletGradient hm_loss_grad(const Matrix& a, const Matrix& p, const Matrix& n, double target_hardness)
{
    TripletGradient h = hardness_grad(a, p, n);
    const double gap = target_hardness - h.value;
    h.value = gap * gap;
    scale(h.a, -2.0 * gap);
    scale(h.p, -2.0 * gap);
    scale(h.n, -2.0 * gap);
    return h;
}

double cap_loss(const TripletBatch& batch, double lambda)
{
    return std::max(-collapseness(batch, lambda), 0.0);
}

double delta_tr(const TripletBatch& batch, double lambda)
{
    require_snapshot(batch);
    return delta_tr_grad(batch.emb_a, batch.emb_p, batch.emb_n, batch.emb_original_a, lambda).value;
}

double anp_loss(const TripletBatch& batch, double lambda)
{
    require_snapshot(batch);
    return std::max(-collapseness(batch, lambda) + delta_tr(batch, lambda), 0.0);
}

double hm_loss(const TripletBatch& batch, double target_hardness)
{
    const double gap = target_hardness - hardness(batch);
    return gap * gap;
}

TripletGradient phase_loss(const Matrix& a, const Matrix& p, const Matrix& n, const Matrix& a0,
                           const PerturbationConfig& cfg, double lambda)
{
    switch (cfg.objective) {
    case Objective::CollapseAware:
        if (cfg.phase == Phase::ANP)
            return anp_loss_grad(a, p, n, a0, lambda);
        return cap_loss_grad(a, p, n, lambda);
    case Objective::Naive: {
        TripletGradient h = hardness_grad(a, p, n);
        h.value = -h.value;
        scale(h.a, -1.0);
        scale(h.p, -1.0);
        scale(h.n, -1.0);
        if (cfg.phase == Phase::ANP) {
            const TripletGradient t = delta_tr_grad(a, p, n, a0, 0.0);
            h.value += t.value;
            add_scaled(h.a, t.a, 1.0);
            add_scaled(h.p, t.p, 1.0);
            add_scaled(h.n, t.n, 1.0);
        }
        return h;
    }
    case Objective::HardnessManipulation:
        return hm_loss_grad(a, p, n, cfg.hm_target);
    }
    fail(ErrorKind::Config, "unknown objective");
}

void project_linf_box(Matrix& x, const Matrix& x0, double epsilon)
{
    if (x.rows() != x0.rows() || x.cols() != x0.cols())
        fail(ErrorKind::Shape, "projection reference shape mismatch");
    auto xv = x.values();
    const auto x0v = x0.values();
    for (std::size_t i = 0; i < xv.size(); ++i) {
        const double delta = std::clamp(xv[i] - x0v[i], -epsilon, epsilon);
        xv[i] = std::clamp(x0v[i] + delta, 0.0, 1.0);
    }
}

namespace {
PgdObserver& pgd_observer()
{
    static PgdObserver observer;
    return observer;
}
} // namespace

void set_pgd_observer(PgdObserver observer)
{
    pgd_observer() = std::move(observer);
}

PerturbationResult pgd_perturb(const EmbeddingModel& model, const TripletBatch& clean,
                               const PerturbationConfig& cfg, double lambda, double epoch_fraction)
{
    if (!(cfg.epsilon >= 0.0) || !(cfg.alpha > 0.0) || cfg.max_steps < 1)
        fail(ErrorKind::Config, "perturbation needs epsilon >= 0, alpha > 0 and at least one step");
    if (!(epoch_fraction > 0.0 && epoch_fraction <= 1.0))
        fail(ErrorKind::Config, "epoch_fraction must lie in (0, 1]");
    const std::size_t batch_size = clean.inputs_a.rows();
    if (batch_size == 0)
        fail(ErrorKind::EmptyBatch, "pgd_perturb on an empty batch");
    if (clean.inputs_p.rows() != batch_size || clean.inputs_n.rows() != batch_size)
        fail(ErrorKind::Shape, "triplet members differ in length");

    const Matrix* clean_inputs[3] = {&clean.inputs_a, &clean.inputs_p, &clean.inputs_n};
    Matrix current[3] = {clean.inputs_a, clean.inputs_p, clean.inputs_n};
    Matrix clean_emb[3];
    Matrix emb[3];
    for (int m = 0; m < 3; ++m) {
        clean_emb[m] = forward(model, *clean_inputs[m]);
        emb[m] = clean_emb[m];
    }
    const Matrix& a0 = clean_emb[0];

    auto mean_shift_now = [&]() {
        double sum = 0.0;
        std::size_t count = 0;
        for (int m = 0; m < 3; ++m) {
            if (!is_target(cfg.phase, m))
                continue;
            for (std::size_t i = 0; i < batch_size; ++i)
                sum += pair_distance(clean_emb[m].row(i), emb[m].row(i));
            count += batch_size;
        }
        return sum / static_cast<double>(count);
    };

    PerturbationResult result;
    const double step = cfg.alpha * epoch_fraction;
    for (std::size_t it = 0;; ++it) {
        ForwardCache caches[3];
        for (int m = 0; m < 3; ++m)
            if (is_target(cfg.phase, m)) {
                caches[m] = forward_cached(model, current[m]);
                emb[m] = caches[m].output;
            }

        const TripletGradient loss = phase_loss(emb[0], emb[1], emb[2], a0, cfg, lambda);
        if (!std::isfinite(loss.value))
            fail(ErrorKind::Numeric, "non-finite adversarial loss at PGD iteration " + std::to_string(it));
        const double c = collapseness(emb[0], emb[1], emb[2], lambda);
        result.trace.push_back({it, loss.value, c, mean_shift_now()});

        if (loss.value == 0.0 || it == cfg.max_steps)
            break;

        const Matrix* upstream[3] = {&loss.a, &loss.p, &loss.n};
        for (int m = 0; m < 3; ++m) {
            if (!is_target(cfg.phase, m))
                continue;
            const GradientBundle g = backward(model, caches[m], *upstream[m], false);
            if (!g.input_grads.all_finite())
                fail(ErrorKind::Numeric, std::string("non-finite input gradient for ") +
                                             (m == 0 ? "anchors" : m == 1 ? "positives" : "negatives") +
                                             " at PGD iteration " + std::to_string(it));
            auto xv = current[m].values();
            const auto gv = g.input_grads.values();
            for (std::size_t i = 0; i < xv.size(); ++i) {
                if (gv[i] > 0.0)
                    xv[i] -= step;
                else if (gv[i] < 0.0)
                    xv[i] += step;
            }
            project_linf_box(current[m], *clean_inputs[m], cfg.epsilon);
        }
        ++result.steps_taken;
    }

    result.final_collapseness = result.trace.back().collapseness;
    for (int m = 0; m < 3; ++m) {
        if (!is_target(cfg.phase, m))
            continue;
        for (std::size_t i = 0; i < batch_size; ++i)
            result.shifts.push_back(pair_distance(clean_emb[m].row(i), emb[m].row(i)));
    }

    TripletBatch& out = result.batch;
    out.anchors = clean.anchors;
    out.positives = clean.positives;
    out.negatives = clean.negatives;
    out.inputs_a = std::move(current[0]);
    out.inputs_p = std::move(current[1]);
    out.inputs_n = std::move(current[2]);
    out.emb_a = std::move(emb[0]);
    out.emb_p = std::move(emb[1]);
    out.emb_n = std::move(emb[2]);
    out.original_a = clean.inputs_a;
    out.emb_original_a = clean_emb[0];

    Matrix* deltas[3] = {&result.delta_a, &result.delta_p, &result.delta_n};
    const Matrix* finals[3] = {&out.inputs_a, &out.inputs_p, &out.inputs_n};
    for (int m = 0; m < 3; ++m) {
        *deltas[m] = *finals[m];
        auto dv = deltas[m]->values();
        const auto cv = clean_inputs[m]->values();
        for (std::size_t i = 0; i < dv.size(); ++i)
            dv[i] -= cv[i];
    }
    if (const PgdObserver& observe = pgd_observer())
        observe(clean, result, cfg);
    return result;
}

void write_trace_jsonl(const std::vector<TraceRecord>& trace, std::ostream& out)
{
    for (const TraceRecord& r : trace) {
        nlohmann::json j = {{"iteration", r.iteration},
                            {"loss", r.loss},
                            {"collapseness", r.collapseness},
                            {"mean_shift", r.mean_shift}};
        out << j.dump() << '\n';
    }
}

} // namespace tride
