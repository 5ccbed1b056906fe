#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tride/dataio.hpp"
#include "tride/numcore.hpp"

namespace tride {

// ---- benign retrieval ------------------------------------------------------

/// Gallery indices other than `exclude`, sorted by ascending distance with the
/// lower index winning ties. Rank 0 is the best position.
std::vector<std::size_t> ranked_candidates(std::span<const double> distances, std::size_t exclude);

/// Rank of `candidate` in ranked_candidates(distances, exclude).
std::size_t rank_of(std::span<const double> distances, std::size_t candidate, std::size_t exclude);

/// Percentage of queries whose top-k (self excluded) holds a same-label item.
/// Queries are rows of the gallery itself.
double recall_at_k(const Matrix& embeddings, std::span<const int> labels, std::span<const std::size_t> queries,
                   std::size_t k);
double recall_at_k(const Matrix& embeddings, std::span<const int> labels, std::size_t k);
double recall_at_k(const EmbeddingModel& model, const Dataset& gallery, std::size_t k);

struct MapResult {
    double map = 0.0;          // percent
    std::size_t skipped = 0;   // queries without a same-label gallery item
};

MapResult mean_average_precision(const Matrix& embeddings, std::span<const int> labels,
                                 std::span<const std::size_t> queries);
MapResult mean_average_precision(const EmbeddingModel& model, const Dataset& gallery);

struct BenignMetrics {
    double recall_at_1 = 0.0;
    double recall_at_2 = 0.0;
    double map = 0.0;
    double intra = 0.0;
    double inter = 0.0;
    double entanglement = 0.0;
};

BenignMetrics benign_metrics(const EmbeddingModel& model, const Dataset& gallery);

// ---- robustness scores -----------------------------------------------------

/// (1 - (O_r - O_i) / (O_g - O_i)) x 100, unclamped. O_g == O_i is degenerate.
double ars_general_raw(double initial, double result, double goal);
/// ars_general_raw clamped to [0, 100].
double ars_general(double initial, double result, double goal);
/// (1 - |r - r~| / r) x 100, unclamped; r must be positive.
double ars_ranking_paper_raw(double rank_before, double rank_after);
double ars_ranking_paper(double rank_before, double rank_after);
/// mu~ / mu x 100 clamped to [0, 100]; mu must be positive.
double ars_recall_paper(double recall_before, double recall_after);
/// Unweighted mean of per-attack scores.
double overall_ars(std::span<const double> per_attack);

// ---- attacks ---------------------------------------------------------------

enum class AttackKind { CaPlus, CaMinus, QaPlus, QaMinus, Recall };

const char* to_string(AttackKind kind) noexcept;
AttackKind parse_attack(const std::string& text);

struct AttackConfig {
    double epsilon = 8.0 / 255.0;
    double alpha = 1.0 / 255.0;
    std::size_t steps = 16;
};

struct TrialSpec {
    AttackKind kind = AttackKind::CaPlus;
    std::size_t query = 0;
    std::vector<std::size_t> candidates; // gallery indices; one for CA, >= 1 for QA
};

struct AttackTrial {
    AttackKind kind = AttackKind::CaPlus;
    std::size_t query = 0;
    std::vector<std::size_t> targets;
    double initial = 0.0; // O_i
    double result = 0.0;  // O_r
    double goal = 0.0;    // O_g
    double ars = 0.0;     // general form, clamped
    double ars_raw = 0.0;
    double ars_paper = 0.0;
    double ars_paper_raw = 0.0;
};

/// Candidate (CA) or query (QA) attack with sign-gradient PGD in the l-inf
/// ball. The gallery is every sample except the query. Throws a degenerate
/// error when the initial rank already equals the goal.
AttackTrial attack_rank(const EmbeddingModel& model, const Dataset& gallery, const TrialSpec& spec,
                        const AttackConfig& cfg);

/// Pushes every query away from its nearest same-label gallery item (re-chosen
/// at each step) and
/// reports R@1 before and after over the given queries.
AttackTrial attack_recall(const EmbeddingModel& model, const Dataset& gallery, std::span<const std::size_t> queries,
                          const AttackConfig& cfg);

struct AttackSuiteConfig {
    std::vector<AttackKind> kinds = {AttackKind::CaPlus, AttackKind::CaMinus, AttackKind::QaPlus,
                                     AttackKind::QaMinus, AttackKind::Recall};
    std::size_t trials = 50;
    std::size_t qa_candidates = 1;
    AttackConfig attack;
    std::uint64_t seed = 0;
};

struct AttackSummary {
    AttackKind kind = AttackKind::CaPlus;
    std::size_t trials = 0;
    std::size_t rejected = 0;
    double ars = 0.0;       // mean clamped general ARS
    double ars_paper = 0.0; // mean of the printed ranking/recall form
};

struct AttackReport {
    BenignMetrics benign;
    AttackConfig attack;
    std::vector<AttackTrial> trials;
    std::vector<AttackSummary> summaries;
    double overall = 0.0;
};

/// Seeded targets: ranking trials pick a random query and candidates whose
/// initial rank lies in the middle half of the gallery.
AttackReport run_attack_suite(const EmbeddingModel& model, const Dataset& gallery, const AttackSuiteConfig& cfg);

nlohmann::ordered_json to_json(const AttackReport& report);
/// Table-shaped summary: benign metrics, per-attack ARS and the overall score.
std::string summary_csv(const AttackReport& report);

} // namespace tride
