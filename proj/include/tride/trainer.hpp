#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tride/adversary.hpp"
#include "tride/dataio.hpp"
#include "tride/metricspace.hpp"
#include "tride/numcore.hpp"
#include "tride/rng.hpp"

namespace tride {

enum class TrainMode {
    Benign,
    NaiveSip,   // SIP maximizing hardness without bound
    HmBaseline, // SIP with (H_D - H)^2
    CaCap,
    CaAnp,
    CaTride,
    Cap,        // CA disabled variants
    Anp,
    Tride,
};

const char* to_string(TrainMode mode) noexcept;
TrainMode parse_mode(const std::string& text);

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 112;
    double learning_rate = 1e-3;
    double eta0 = 0.2;
    double lambda = 10.0;
    TrainMode mode = TrainMode::CaTride;
    bool progressive_alpha = true;
    std::uint64_t seed = 0;

    std::vector<std::size_t> hidden = {64, 64};
    std::size_t embedding_dim = 16;
    /// 0 picks ceil(N / (B/2)): one anchor-positive pair per training sample.
    std::size_t batches_per_epoch = 0;

    MetricConfig metric;        // margin and hinge; lambda above takes precedence
    PerturbationConfig pgd;     // epsilon, alpha, steps, gamma, beta_TR, H_D

    /// Run CA-CAP, CA-ANP and CA-SIP on every batch from this fraction of
    /// training onward and log their embedding shifts (diagnostic only).
    bool probe_shifts = false;
    double probe_from = 2.0 / 3.0;

    /// Where per-epoch checkpoints go; empty disables them.
    std::filesystem::path checkpoint_dir;
};

nlohmann::json config_to_json(const TrainConfig& cfg);
/// Fields absent from `j` keep the values already in `cfg`.
void apply_config_json(TrainConfig& cfg, const nlohmann::json& j);
void validate(const TrainConfig& cfg);

struct CollapseRecord {
    std::size_t epoch = 0;
    std::size_t batch = 0;      // global batch counter
    std::string phase;          // CAP, ANP, SIP or clean
    double d_bar = 0.0;         // mean pairwise distance of the clean batch
    double separability = 0.0;  // of the triplets the model is trained on
    double separability_clean = 0.0;
    double hardness = 0.0;      // clean batch
    double collapseness = 0.0;  // clean batch
    double mean_shift = 0.0;    // mean perturbation-induced shift / d_bar
    double loss = 0.0;
    std::size_t fallback = 0;   // triplets drawn outside the semi-hard window
    std::size_t perturbed = 0;  // perturbed samples in the batch
    std::size_t pgd_steps = 0;
    std::optional<double> probe_cap, probe_anp, probe_sip;
};

using CollapseLog = std::vector<CollapseRecord>;

nlohmann::ordered_json to_json(const CollapseRecord& r);
CollapseRecord record_from_json(const nlohmann::json& j);
void write_log_jsonl(const CollapseLog& log, std::ostream& out);
/// Parses a CollapseLog; malformed lines raise a parse error naming the line.
CollapseLog read_log_jsonl(std::istream& in);

/// eta0 (1 - (n / (2 n_total))^2).
double eta_schedule(std::size_t epoch, std::size_t total_epochs, double eta0);
/// epoch / total_epochs, or 1 when the progressive step is disabled.
double alpha_fraction(std::size_t epoch, std::size_t total_epochs, bool enabled = true);

/// Perturbation phase of a batch, or nothing for benign training.
std::optional<Phase> phase_for_batch(TrainMode mode, std::size_t global_batch);

struct NegativeChoice {
    std::size_t index = 0; // position in the candidate list
    bool fallback = false;
};

/// Picks a negative with d_ap < d_an < d_ap + eta uniformly at random. With an
/// empty window it takes the nearest negative beyond d_ap, or the farthest
/// negative when none is beyond.
NegativeChoice select_semi_hard_negative(double d_ap, std::span<const double> negative_distances, double eta,
                                         Rng& rng);

struct SampledTriplets {
    std::vector<std::size_t> anchors, positives, negatives;
    std::size_t fallback = 0;
};

/// B triplets: ceil(B/2) anchor-positive pairs from classes visited in a
/// shuffled round-robin, each used in both orientations with its own negative.
SampledTriplets semi_hard_sample(const Matrix& embeddings, std::span<const int> labels, double eta,
                                 std::size_t batch_size, Rng& rng);

struct AdamState {
    std::vector<double> m, v;
    std::size_t t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr);

/// Fills inputs and embeddings of a batch from dataset rows.
TripletBatch make_batch(const EmbeddingModel& model, const Matrix& features, const SampledTriplets& t);

struct StepContext {
    std::size_t epoch = 1;       // 1-based
    std::size_t global_batch = 0;
    double epoch_fraction = 1.0; // PGD step multiplier
    bool probe = false;          // run the shift probes on this batch
};

/// One optimizer update on a sampled batch; returns its log record.
CollapseRecord train_step(EmbeddingModel& model, AdamState& adam, const TripletBatch& clean,
                          const TrainConfig& cfg, std::optional<Phase> phase, const StepContext& ctx);

struct TrainResult {
    EmbeddingModel model;
    EmbeddingModel best_model;
    double best_recall_at_1 = -1.0;
    CollapseLog log;
    std::size_t optimizer_updates = 0;
    std::size_t perturbed_samples = 0;
    std::vector<std::filesystem::path> checkpoints;
};

/// Full training run, deterministic given cfg.seed. `eval` selects the best
/// checkpoint by benign R@1 (the training set is used when it is empty).
TrainResult run_training(const Dataset& train, const TrainConfig& cfg, const Dataset* eval = nullptr);

std::size_t batches_per_epoch(std::size_t train_size, const TrainConfig& cfg);

/// Aggregates of a CollapseLog. "Late" records are those whose epoch lies in
/// the final `late_fraction` of the run.
struct LogSummary {
    std::size_t records = 0;
    std::size_t epochs = 0;
    double late_median_separability = 0.0;
    double late_median_separability_clean = 0.0;
    double late_fraction_nonpositive = 0.0; // share of late batches with separability <= 0
    double initial_d_bar = 0.0;             // mean over the first epoch
    double final_d_bar = 0.0;               // mean over the last epoch
    std::size_t probe_records = 0;
    double probe_cap = 0.0; // mean probed shifts over late records
    double probe_anp = 0.0;
    double probe_sip = 0.0;
};

LogSummary summarize_log(const CollapseLog& log, double late_fraction = 1.0 / 3.0);
nlohmann::ordered_json to_json(const LogSummary& s);

} // namespace tride
