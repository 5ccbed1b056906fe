#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tride/matrix.hpp"

namespace tride {

/// Labeled samples in the unit box. Construction validates that every
/// coordinate lies in [0,1], ids are unique and every class has >= 2 members.
class Dataset {
public:
    Dataset() = default;
    Dataset(std::vector<std::uint64_t> ids, Matrix features, std::vector<int> labels, std::string provenance);

    std::size_t size() const noexcept { return labels_.size(); }
    std::size_t dim() const noexcept { return features_.cols(); }
    std::size_t class_count() const noexcept { return class_count_; }

    const std::vector<std::uint64_t>& ids() const noexcept { return ids_; }
    const Matrix& features() const noexcept { return features_; }
    const std::vector<int>& labels() const noexcept { return labels_; }
    const std::string& provenance() const noexcept { return provenance_; }

    /// Sample indices grouped by label, labels ascending.
    std::vector<std::pair<int, std::vector<std::size_t>>> indices_by_class() const;

    Dataset subset(std::span<const std::size_t> indices, std::string provenance) const;

    /// Sample equality; provenance is not compared.
    friend bool operator==(const Dataset& a, const Dataset& b)
    {
        return a.ids_ == b.ids_ && a.labels_ == b.labels_ && a.features_ == b.features_;
    }

private:
    std::vector<std::uint64_t> ids_;
    Matrix features_;
    std::vector<int> labels_;
    std::string provenance_;
    std::size_t class_count_ = 0;
};

struct SynthSpec {
    std::size_t classes = 8;
    std::size_t per_class = 40;
    std::size_t dim = 32;
    double sigma = 0.05;      // per-coordinate cluster spread
    double separation = 1.0;  // expected distance between class centers
    std::uint64_t seed = 0;

    static SynthSpec separated(std::uint64_t seed);
    /// Overlapping clusters that are prone to collapse under strong adversaries.
    static SynthSpec entangled(std::uint64_t seed);
};

/// Gaussian clusters clamped to the unit box. Centers are 0.5 + h u with u
/// uniform in [-1,1]^D and h chosen so the expected center distance equals
/// `separation`; h > 0.3 would leave [0.2, 0.8]^D and is rejected.
Dataset generate_clusters(const SynthSpec& spec);

Dataset load_csv(const std::filesystem::path& path);
void save_csv(const Dataset& dataset, const std::filesystem::path& path);

/// Stratified split; each class must keep >= 2 samples on both sides.
std::pair<Dataset, Dataset> split(const Dataset& dataset, double train_fraction, std::uint64_t seed);

/// 64-bit FNV-1a, used to fingerprint input files.
std::uint64_t fnv1a64(std::string_view bytes);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

} // namespace tride
