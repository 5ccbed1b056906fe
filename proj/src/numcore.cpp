#include "tride/numcore.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "tride/error.hpp"
#include "tride/kernels.hpp"
#include "tride/rng.hpp"

namespace tride {

namespace {

void check_model(const std::vector<std::size_t>& dims, const std::vector<Layer>& layers)
{
    if (dims.size() < 2)
        fail(ErrorKind::Config, "model needs at least an input and an output dimension");
    if (layers.size() + 1 != dims.size())
        fail(ErrorKind::Shape, "layer count does not match layer_dims");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const Layer& layer = layers[l];
        if (layer.weight.rows() != dims[l + 1] || layer.weight.cols() != dims[l] ||
            layer.bias.size() != dims[l + 1])
            fail(ErrorKind::Shape, "layer " + std::to_string(l) + " shape inconsistent with layer_dims");
    }
}

} // namespace

EmbeddingModel::EmbeddingModel(std::vector<std::size_t> layer_dims, std::vector<Layer> layers,
                               std::uint64_t seed)
    : dims_(std::move(layer_dims)), layers_(std::move(layers)), seed_(seed)
{
    check_model(dims_, layers_);
}

EmbeddingModel EmbeddingModel::initialize(std::vector<std::size_t> layer_dims, std::uint64_t seed)
{
    if (layer_dims.size() < 2 || std::ranges::any_of(layer_dims, [](std::size_t d) { return d == 0; }))
        fail(ErrorKind::Config, "layer_dims must list at least two positive sizes");
    Rng rng(seed);
    std::vector<Layer> layers;
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        const std::size_t fan_in = layer_dims[l];
        const std::size_t fan_out = layer_dims[l + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Layer layer{Matrix(fan_out, fan_in), std::vector<double>(fan_out, 0.0)};
        for (double& w : layer.weight.values())
            w = rng.uniform(-limit, limit);
        layers.push_back(std::move(layer));
    }
    return EmbeddingModel(std::move(layer_dims), std::move(layers), seed);
}

std::size_t EmbeddingModel::parameter_count() const
{
    std::size_t n = 0;
    for (const Layer& layer : layers_)
        n += layer.weight.size() + layer.bias.size();
    return n;
}

ForwardCache forward_cached(const EmbeddingModel& model, const Matrix& inputs)
{
    if (inputs.cols() != model.input_dim())
        fail(ErrorKind::Shape, "forward: input dimension " + std::to_string(inputs.cols()) +
                                   " != model input " + std::to_string(model.input_dim()));
    const auto& layers = model.layers();
    ForwardCache cache;
    cache.layer_inputs.reserve(layers.size());
    cache.pre_activation.reserve(layers.size());

    Matrix current = inputs;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Matrix z = kernels::omp::affine_forward(current, layers[l].weight, layers[l].bias);
        cache.layer_inputs.push_back(std::move(current));
        if (l + 1 < layers.size()) {
            current = z;
            for (double& v : current.values())
                v = v > 0.0 ? v : 0.0;
        }
        cache.pre_activation.push_back(std::move(z));
    }

    const Matrix& z = cache.pre_activation.back();
    cache.output = Matrix(z.rows(), z.cols());
    cache.norms.resize(z.rows());
    for (std::size_t r = 0; r < z.rows(); ++r) {
        double sq = 0.0;
        for (double v : z.row(r))
            sq += v * v;
        const double norm = std::sqrt(sq);
        cache.norms[r] = norm;
        const double denom = std::max(norm, kNormFloor);
        auto out = cache.output.row(r);
        const auto in = z.row(r);
        for (std::size_t c = 0; c < in.size(); ++c)
            out[c] = in[c] / denom;
    }
    return cache;
}

Matrix forward(const EmbeddingModel& model, const Matrix& inputs)
{
    return std::move(forward_cached(model, inputs).output);
}

GradientBundle backward(const EmbeddingModel& model, const ForwardCache& cache, const Matrix& upstream,
                        bool with_params)
{
    const Matrix& y = cache.output;
    if (upstream.rows() != y.rows() || upstream.cols() != y.cols())
        fail(ErrorKind::Shape, "backward: upstream gradient shape does not match forward output");

    // Through the normalization: dz = (g - y (y.g)) / |z| above the floor, g / floor below it.
    Matrix dz(y.rows(), y.cols());
    for (std::size_t r = 0; r < y.rows(); ++r) {
        const auto g = upstream.row(r);
        const auto yr = y.row(r);
        auto out = dz.row(r);
        const double norm = cache.norms[r];
        if (norm >= kNormFloor) {
            double dot = 0.0;
            for (std::size_t c = 0; c < g.size(); ++c)
                dot += yr[c] * g[c];
            for (std::size_t c = 0; c < g.size(); ++c)
                out[c] = (g[c] - yr[c] * dot) / norm;
        } else {
            for (std::size_t c = 0; c < g.size(); ++c)
                out[c] = g[c] / kNormFloor;
        }
    }

    const auto& layers = model.layers();
    GradientBundle bundle;
    if (with_params) {
        bundle.param_grads.resize(layers.size());
        for (std::size_t l = 0; l < layers.size(); ++l)
            bundle.param_grads[l] = Layer{Matrix(layers[l].weight.rows(), layers[l].weight.cols()),
                                          std::vector<double>(layers[l].bias.size(), 0.0)};
    }

    for (std::size_t l = layers.size(); l-- > 0;) {
        if (with_params)
            kernels::omp::affine_backward_params(cache.layer_inputs[l], dz, bundle.param_grads[l].weight,
                                                 bundle.param_grads[l].bias);
        Matrix dx = kernels::omp::affine_backward_input(dz, layers[l].weight);
        if (l == 0) {
            bundle.input_grads = std::move(dx);
            break;
        }
        const Matrix& pre = cache.pre_activation[l - 1];
        auto gv = dx.values();
        const auto pv = pre.values();
        for (std::size_t i = 0; i < gv.size(); ++i)
            if (!(pv[i] > 0.0))
                gv[i] = 0.0;
        dz = std::move(dx);
    }
    return bundle;
}

GradientBundle backward(const EmbeddingModel& model, const Matrix& inputs, const Matrix& upstream)
{
    return backward(model, forward_cached(model, inputs), upstream, true);
}

std::vector<double> flatten_parameters(std::span<const Layer> layers)
{
    std::vector<double> flat;
    for (const Layer& layer : layers) {
        flat.insert(flat.end(), layer.weight.storage().begin(), layer.weight.storage().end());
        flat.insert(flat.end(), layer.bias.begin(), layer.bias.end());
    }
    return flat;
}

std::vector<double> flatten_parameters(const EmbeddingModel& model)
{
    return flatten_parameters(model.layers());
}

void assign_parameters(EmbeddingModel& model, std::span<const double> flat)
{
    if (flat.size() != model.parameter_count())
        fail(ErrorKind::Shape, "assign_parameters: expected " + std::to_string(model.parameter_count()) +
                                   " values, got " + std::to_string(flat.size()));
    std::size_t k = 0;
    for (Layer& layer : model.layers()) {
        for (double& w : layer.weight.values())
            w = flat[k++];
        for (double& b : layer.bias)
            b = flat[k++];
    }
}

void accumulate(std::vector<Layer>& into, const std::vector<Layer>& add)
{
    if (into.size() != add.size())
        fail(ErrorKind::Shape, "accumulate: layer count mismatch");
    for (std::size_t l = 0; l < into.size(); ++l) {
        auto dst = into[l].weight.values();
        const auto src = add[l].weight.values();
        if (dst.size() != src.size() || into[l].bias.size() != add[l].bias.size())
            fail(ErrorKind::Shape, "accumulate: layer shape mismatch");
        for (std::size_t i = 0; i < dst.size(); ++i)
            dst[i] += src[i];
        for (std::size_t i = 0; i < into[l].bias.size(); ++i)
            into[l].bias[i] += add[l].bias[i];
    }
}

nlohmann::json checkpoint_to_json(const EmbeddingModel& model)
{
    nlohmann::json j;
    j["format_version"] = kFormatVersion;
    j["layer_dims"] = model.layer_dims();
    j["seed"] = model.seed();
    auto weights = nlohmann::json::array();
    auto biases = nlohmann::json::array();
    for (const Layer& layer : model.layers()) {
        weights.push_back(layer.weight.storage());
        biases.push_back(layer.bias);
    }
    j["weights"] = std::move(weights);
    j["biases"] = std::move(biases);
    return j;
}

EmbeddingModel checkpoint_from_json(const nlohmann::json& j)
{
    try {
        if (j.at("format_version").get<int>() != kFormatVersion)
            fail(ErrorKind::Parse, "unsupported checkpoint format_version");
        auto dims = j.at("layer_dims").get<std::vector<std::size_t>>();
        const auto& weights = j.at("weights");
        const auto& biases = j.at("biases");
        if (dims.size() < 2 || weights.size() + 1 != dims.size() || biases.size() + 1 != dims.size())
            fail(ErrorKind::Parse, "checkpoint layer count inconsistent with layer_dims");
        std::vector<Layer> layers;
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            auto w = weights[l].get<std::vector<double>>();
            if (w.size() != dims[l] * dims[l + 1])
                fail(ErrorKind::Parse, "checkpoint weight array " + std::to_string(l) + " has wrong length");
            layers.push_back(Layer{Matrix(dims[l + 1], dims[l], std::move(w)),
                                   biases[l].get<std::vector<double>>()});
        }
        return EmbeddingModel(std::move(dims), std::move(layers), j.at("seed").get<std::uint64_t>());
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, std::string("checkpoint: ") + e.what());
    }
}

void save_checkpoint(const EmbeddingModel& model, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        fail(ErrorKind::Io, "cannot write checkpoint " + path.string());
    out << checkpoint_to_json(model).dump(1) << '\n';
}

EmbeddingModel load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorKind::Io, "cannot read checkpoint " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, "checkpoint " + path.string() + ": " + e.what());
    }
    return checkpoint_from_json(j);
}

} // namespace tride
