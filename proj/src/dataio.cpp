#include "tride/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "tride/error.hpp"
#include "tride/rng.hpp"

namespace tride {

namespace {

std::string format_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split_fields(const std::string& line)
{
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ','))
        fields.push_back(field);
    if (!line.empty() && line.back() == ',')
        fields.emplace_back();
    return fields;
}

double parse_number(const std::string& text, std::size_t row)
{
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size())
            throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        fail(ErrorKind::Parse, "row " + std::to_string(row) + ": cannot parse '" + text + "'");
    }
}

} // namespace

Dataset::Dataset(std::vector<std::uint64_t> ids, Matrix features, std::vector<int> labels,
                 std::string provenance)
    : ids_(std::move(ids)), features_(std::move(features)), labels_(std::move(labels)),
      provenance_(std::move(provenance))
{
    if (labels_.empty())
        fail(ErrorKind::Validation, "dataset has no samples");
    if (ids_.size() != labels_.size() || features_.rows() != labels_.size())
        fail(ErrorKind::Shape, "dataset ids, labels and features differ in length");
    for (std::size_t r = 0; r < features_.rows(); ++r)
        for (double v : features_.row(r))
            if (!(v >= 0.0 && v <= 1.0))
                fail(ErrorKind::Validation, "sample " + std::to_string(r) + " has a coordinate outside [0,1]");
    std::set<std::uint64_t> seen;
    for (std::uint64_t id : ids_)
        if (!seen.insert(id).second)
            fail(ErrorKind::Validation, "duplicate sample id " + std::to_string(id));
    std::map<int, std::size_t> counts;
    for (int label : labels_)
        ++counts[label];
    for (const auto& [label, count] : counts)
        if (count < 2)
            fail(ErrorKind::Validation, "class " + std::to_string(label) + " has fewer than 2 samples");
    class_count_ = counts.size();
}

std::vector<std::pair<int, std::vector<std::size_t>>> Dataset::indices_by_class() const
{
    std::map<int, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < labels_.size(); ++i)
        groups[labels_[i]].push_back(i);
    return {groups.begin(), groups.end()};
}

Dataset Dataset::subset(std::span<const std::size_t> indices, std::string provenance) const
{
    std::vector<std::uint64_t> ids;
    std::vector<int> labels;
    for (std::size_t i : indices) {
        ids.push_back(ids_.at(i));
        labels.push_back(labels_.at(i));
    }
    return Dataset(std::move(ids), features_.gather(indices), std::move(labels), std::move(provenance));
}

SynthSpec SynthSpec::separated(std::uint64_t seed)
{
    return SynthSpec{8, 40, 32, 0.03, 1.2, seed};
}

SynthSpec SynthSpec::entangled(std::uint64_t seed)
{
    return SynthSpec{8, 40, 32, 0.05, 0.25, seed};
}

Dataset generate_clusters(const SynthSpec& spec)
{
    if (spec.classes < 2)
        fail(ErrorKind::Config, "synthetic data needs at least 2 classes");
    if (spec.per_class < 2)
        fail(ErrorKind::Config, "synthetic data needs at least 2 samples per class");
    if (spec.dim < 1)
        fail(ErrorKind::Config, "synthetic data needs dim >= 1");
    if (!(spec.sigma > 0.0))
        fail(ErrorKind::Config, "cluster spread sigma must be positive");
    if (!(spec.separation >= 0.0))
        fail(ErrorKind::Config, "center separation must be non-negative");
    const double half_width = spec.separation / std::sqrt(2.0 * static_cast<double>(spec.dim) / 3.0);
    if (half_width > 0.3)
        fail(ErrorKind::Config, "center separation " + format_double(spec.separation) +
                                    " does not fit inside [0.2, 0.8]^" + std::to_string(spec.dim));

    Rng rng(spec.seed);
    Matrix centers(spec.classes, spec.dim);
    for (double& v : centers.values())
        v = 0.5 + half_width * rng.uniform(-1.0, 1.0);

    const std::size_t n = spec.classes * spec.per_class;
    Matrix features(n, spec.dim);
    std::vector<int> labels(n);
    std::vector<std::uint64_t> ids(n);
    for (std::size_t k = 0; k < spec.classes; ++k)
        for (std::size_t s = 0; s < spec.per_class; ++s) {
            const std::size_t r = k * spec.per_class + s;
            ids[r] = r;
            labels[r] = static_cast<int>(k);
            for (std::size_t c = 0; c < spec.dim; ++c)
                features(r, c) = std::clamp(centers(k, c) + spec.sigma * rng.normal(), 0.0, 1.0);
        }

    std::ostringstream prov;
    prov << "synthetic classes=" << spec.classes << " per_class=" << spec.per_class << " dim=" << spec.dim
         << " sigma=" << format_double(spec.sigma) << " separation=" << format_double(spec.separation)
         << " seed=" << spec.seed;
    return Dataset(std::move(ids), std::move(features), std::move(labels), prov.str());
}

std::uint64_t fnv1a64(std::string_view bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorKind::Io, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        fail(ErrorKind::Io, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        fail(ErrorKind::Io, "write failed for " + path.string());
}

Dataset load_csv(const std::filesystem::path& path)
{
    const std::string text = read_file(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.empty())
        fail(ErrorKind::Validation, path.string() + ": empty file");
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    const auto header = split_fields(line);
    if (header.size() < 3 || header[0] != "id" || header[1] != "label")
        fail(ErrorKind::Parse, path.string() + ": header must be id,label,f0..f{D-1}");
    const std::size_t dim = header.size() - 2;
    for (std::size_t c = 0; c < dim; ++c)
        if (header[c + 2] != "f" + std::to_string(c))
            fail(ErrorKind::Parse, path.string() + ": unexpected header column '" + header[c + 2] + "'");

    std::vector<std::uint64_t> ids;
    std::vector<int> labels;
    std::vector<double> values;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        const auto fields = split_fields(line);
        if (fields.size() != header.size())
            fail(ErrorKind::Parse, path.string() + ": row " + std::to_string(row) + " has " +
                                       std::to_string(fields.size()) + " fields, expected " +
                                       std::to_string(header.size()));
        const double id = parse_number(fields[0], row);
        const double label = parse_number(fields[1], row);
        if (id < 0 || id != std::floor(id) || label != std::floor(label))
            fail(ErrorKind::Parse, path.string() + ": row " + std::to_string(row) + " id/label must be integers");
        ids.push_back(static_cast<std::uint64_t>(id));
        labels.push_back(static_cast<int>(label));
        for (std::size_t c = 0; c < dim; ++c) {
            const double v = parse_number(fields[c + 2], row);
            if (!(v >= 0.0 && v <= 1.0))
                fail(ErrorKind::Validation, path.string() + ": row " + std::to_string(row) + " feature f" +
                                                std::to_string(c) + "=" + fields[c + 2] + " outside [0,1]");
            values.push_back(v);
        }
    }
    if (labels.empty())
        fail(ErrorKind::Validation, path.string() + ": no samples");
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
    const std::size_t n = labels.size();
    return Dataset(std::move(ids), Matrix(n, dim, std::move(values)), std::move(labels),
                   std::string("csv fnv1a64=") + hash);
}

void save_csv(const Dataset& dataset, const std::filesystem::path& path)
{
    std::string out = "id,label";
    for (std::size_t c = 0; c < dataset.dim(); ++c)
        out += ",f" + std::to_string(c);
    out += '\n';
    for (std::size_t r = 0; r < dataset.size(); ++r) {
        out += std::to_string(dataset.ids()[r]) + ',' + std::to_string(dataset.labels()[r]);
        for (double v : dataset.features().row(r))
            out += ',' + format_double(v);
        out += '\n';
    }
    write_file(path, out);
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, double train_fraction, std::uint64_t seed)
{
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        fail(ErrorKind::Config, "train fraction must lie strictly between 0 and 1 (both splits non-empty)");
    Rng rng(seed);
    std::vector<std::size_t> train, test;
    for (auto& [label, members] : dataset.indices_by_class()) {
        rng.shuffle(std::span<std::size_t>(members));
        const auto n = members.size();
        const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n) + 0.5));
        if (n_train < 2 || n - n_train < 2)
            fail(ErrorKind::Config, "split: class " + std::to_string(label) + " with " + std::to_string(n) +
                                        " samples cannot keep 2 on each side");
        train.insert(train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
        test.insert(test.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train), members.end());
    }
    std::ranges::sort(train);
    std::ranges::sort(test);
    const std::string tag = " split=" + format_double(train_fraction) + " seed=" + std::to_string(seed);
    return {dataset.subset(train, dataset.provenance() + tag + " part=train"),
            dataset.subset(test, dataset.provenance() + tag + " part=test")};
}

} // namespace tride
