#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "tride/matrix.hpp"

namespace tride {

/// Floor applied to the pre-normalization norm of an embedding.
inline constexpr double kNormFloor = 1e-12;

inline constexpr int kFormatVersion = 1;

struct Layer {
    Matrix weight;             // out x in
    std::vector<double> bias;  // out

    friend bool operator==(const Layer&, const Layer&) = default;
};

/// Feed-forward embedding network: affine layers with rectifier activations on
/// hidden layers, a linear last layer and L2 normalization of the output.
class EmbeddingModel {
public:
    EmbeddingModel() = default;
    EmbeddingModel(std::vector<std::size_t> layer_dims, std::vector<Layer> layers, std::uint64_t seed);

    /// Uniform Glorot initialization, biases zero.
    static EmbeddingModel initialize(std::vector<std::size_t> layer_dims, std::uint64_t seed);

    const std::vector<std::size_t>& layer_dims() const noexcept { return dims_; }
    const std::vector<Layer>& layers() const noexcept { return layers_; }
    std::vector<Layer>& layers() noexcept { return layers_; }
    std::size_t input_dim() const { return dims_.front(); }
    std::size_t output_dim() const { return dims_.back(); }
    std::uint64_t seed() const noexcept { return seed_; }
    std::size_t parameter_count() const;

    friend bool operator==(const EmbeddingModel&, const EmbeddingModel&) = default;

private:
    std::vector<std::size_t> dims_;
    std::vector<Layer> layers_;
    std::uint64_t seed_ = 0;
};

/// Activations retained by a forward pass for the matching backward pass.
struct ForwardCache {
    std::vector<Matrix> layer_inputs;   // input of each affine layer
    std::vector<Matrix> pre_activation; // output of each affine layer
    std::vector<double> norms;          // pre-normalization norm per sample
    Matrix output;                      // normalized embeddings
};

struct GradientBundle {
    std::vector<Layer> param_grads;
    Matrix input_grads;
};

ForwardCache forward_cached(const EmbeddingModel& model, const Matrix& inputs);
Matrix forward(const EmbeddingModel& model, const Matrix& inputs);

/// Exact gradients of sum(upstream .* forward(inputs)) with respect to the
/// parameters and the inputs. Rectifier subgradient at 0 is 0.
GradientBundle backward(const EmbeddingModel& model, const ForwardCache& cache, const Matrix& upstream,
                        bool with_params = true);
GradientBundle backward(const EmbeddingModel& model, const Matrix& inputs, const Matrix& upstream);

/// Parameters flattened layer by layer (weights row-major, then bias).
std::vector<double> flatten_parameters(const EmbeddingModel& model);
std::vector<double> flatten_parameters(std::span<const Layer> layers);
void assign_parameters(EmbeddingModel& model, std::span<const double> flat);

/// Element-wise sum of two gradient sets with identical shapes.
void accumulate(std::vector<Layer>& into, const std::vector<Layer>& add);

nlohmann::json checkpoint_to_json(const EmbeddingModel& model);
EmbeddingModel checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const EmbeddingModel& model, const std::filesystem::path& path);
EmbeddingModel load_checkpoint(const std::filesystem::path& path);

} // namespace tride
