#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tride/metricspace.hpp"
#include "tride/numcore.hpp"

namespace tride {

/// Which triplet members a perturbation may move.
enum class Phase {
    CAP, // candidates: positives and negatives
    ANP, // anchors only
    SIP, // all three
};

/// What the adversary optimizes.
enum class Objective {
    CollapseAware,        // max(-C, 0) for CAP/SIP, max(-C + delta_TR, 0) for ANP
    Naive,                // CA disabled: -H (plus delta_TR for ANP), never clipped
    HardnessManipulation, // (H_D - H)^2
};

const char* to_string(Phase phase) noexcept;
Phase parse_phase(const std::string& text);

struct PerturbationConfig {
    double epsilon = 8.0 / 255.0;
    double alpha = 1.0 / 255.0;
    std::size_t max_steps = 16;
    Phase phase = Phase::CAP;
    double gamma = 0.5;
    double margin_toprank = 0.04; // beta_TR
    Objective objective = Objective::CollapseAware;
    double hm_target = 0.0;       // H_D for the hardness-manipulation baseline
};

struct TraceRecord {
    std::size_t iteration = 0;
    double loss = 0.0;
    double collapseness = 0.0;
    double mean_shift = 0.0;
};

struct PerturbationResult {
    TripletBatch batch;        // perturbed inputs and their embeddings
    Matrix delta_a, delta_p, delta_n;
    std::size_t steps_taken = 0;
    double final_collapseness = 0.0;
    /// d(e(x), e(x + delta)) for every perturbed sample, in A, P, N order.
    std::vector<double> shifts;
    std::vector<TraceRecord> trace;

    double mean_shift() const;
};

struct TopRankSplit {
    std::vector<std::size_t> positives; // P_upsilon
    std::vector<std::size_t> negatives; // N_upsilon
};

/// The ceil(B/2) aligned positives and negatives closest to their anchors;
/// ties go to the lower index.
TopRankSplit top_rank_split(const Matrix& a, const Matrix& p, const Matrix& n);
TopRankSplit top_rank_split(const TripletBatch& batch);

double cap_loss(const TripletBatch& batch, double lambda);
/// exp(max(C,0)) (d(A, N_top) - d(A, A0)). Throws a state error when the
/// batch carries no A0 embeddings.
double delta_tr(const TripletBatch& batch, double lambda);
double anp_loss(const TripletBatch& batch, double lambda);
double hm_loss(const TripletBatch& batch, double target_hardness);

TripletGradient cap_loss_grad(const Matrix& a, const Matrix& p, const Matrix& n, double lambda);
TripletGradient delta_tr_grad(const Matrix& a, const Matrix& p, const Matrix& n, const Matrix& a0,
                              double lambda);
TripletGradient anp_loss_grad(const Matrix& a, const Matrix& p, const Matrix& n, const Matrix& a0,
                              double lambda);
TripletGradient hm_loss_grad(const Matrix& a, const Matrix& p, const Matrix& n, double target_hardness);

/// Loss the adversary decreases for the configured phase and objective.
/// Proximity weights and top-rank membership are constants for the gradient.
TripletGradient phase_loss(const Matrix& a, const Matrix& p, const Matrix& n, const Matrix& a0,
                           const PerturbationConfig& cfg, double lambda);

/// Clip x - x0 to [-eps, eps] per coordinate, then x to [0, 1].
void project_linf_box(Matrix& x, const Matrix& x0, double epsilon);

/// Sign-gradient PGD on the phase targets starting from the clean batch.
/// Step size is alpha * epoch_fraction; stops early once the phase loss is 0.
PerturbationResult pgd_perturb(const EmbeddingModel& model, const TripletBatch& clean,
                               const PerturbationConfig& cfg, double lambda, double epoch_fraction);

/// Called with every completed pgd_perturb result, including the ones made
/// inside training. Used to audit budgets; pass an empty function to detach.
using PgdObserver =
    std::function<void(const TripletBatch& clean, const PerturbationResult& result, const PerturbationConfig& cfg)>;
void set_pgd_observer(PgdObserver observer);

void write_trace_jsonl(const std::vector<TraceRecord>& trace, std::ostream& out);

} // namespace tride
