#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "tride/dataio.hpp"
#include "tride/error.hpp"
#include "tride/evalrobust.hpp"
#include "tride/metricspace.hpp"
#include "tride/trainer.hpp"

namespace tride {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / "tride_dataio_test";
    fs::create_directories(dir);
    return dir / name;
}

ErrorKind kind_of(const std::function<void()>& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorKind::State;
}

TEST(Dataset, Validation)
{
    const Matrix two(2, 1, std::vector<double>{0.2, 0.4});
    EXPECT_NO_THROW(Dataset({1, 2}, two, {0, 0}, "t"));
    EXPECT_EQ(kind_of([&] { Dataset({1, 1}, two, {0, 0}, "t"); }), ErrorKind::Validation);
    EXPECT_EQ(kind_of([&] { Dataset({1, 2}, Matrix(2, 1, std::vector<double>{0.2, 1.5}), {0, 0}, "t"); }),
              ErrorKind::Validation);
    EXPECT_EQ(kind_of([&] { Dataset({1, 2}, two, {0, 1}, "t"); }), ErrorKind::Validation);
    EXPECT_EQ(kind_of([&] { Dataset({}, Matrix(), {}, "t"); }), ErrorKind::Validation);
}

TEST(Generate, DeterministicAndInBox)
{
    const Dataset a = generate_clusters(SynthSpec::entangled(7));
    const Dataset b = generate_clusters(SynthSpec::entangled(7));
    const Dataset c = generate_clusters(SynthSpec::entangled(8));
    EXPECT_EQ(a, b);
    EXPECT_FALSE(a == c);
    EXPECT_EQ(a.size(), 320u);
    EXPECT_EQ(a.dim(), 32u);
    EXPECT_EQ(a.class_count(), 8u);
    for (double v : a.features().values()) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(Generate, SeparatedPresetIsLinearlySeparable)
{
    SynthSpec s = SynthSpec::separated(3);
    s.classes = 2;
    const Dataset d = generate_clusters(s);
    // Project onto the difference of class means; the classes do not overlap.
    const auto groups = d.indices_by_class();
    std::vector<double> m0(d.dim()), m1(d.dim());
    for (std::size_t i : groups[0].second)
        for (std::size_t c = 0; c < d.dim(); ++c)
            m0[c] += d.features()(i, c) / static_cast<double>(groups[0].second.size());
    for (std::size_t i : groups[1].second)
        for (std::size_t c = 0; c < d.dim(); ++c)
            m1[c] += d.features()(i, c) / static_cast<double>(groups[1].second.size());
    auto project = [&](std::size_t i) {
        double s = 0.0;
        for (std::size_t c = 0; c < d.dim(); ++c)
            s += (m1[c] - m0[c]) * (d.features()(i, c) - 0.5 * (m0[c] + m1[c]));
        return s;
    };
    for (std::size_t i : groups[0].second)
        EXPECT_LT(project(i), 0.0);
    for (std::size_t i : groups[1].second)
        EXPECT_GT(project(i), 0.0);
}

TEST(Generate, InfeasibleSpecs)
{
    SynthSpec s = SynthSpec::entangled(1);
    s.classes = 1;
    EXPECT_EQ(kind_of([&] { generate_clusters(s); }), ErrorKind::Config);
    s = SynthSpec::entangled(1);
    s.separation = 50.0;
    EXPECT_EQ(kind_of([&] { generate_clusters(s); }), ErrorKind::Config);
    s = SynthSpec::entangled(1);
    s.sigma = 0.0;
    EXPECT_EQ(kind_of([&] { generate_clusters(s); }), ErrorKind::Config);
}

TEST(Generate, EntangledPresetLandsInTargetBand)
{
    // Benign-trained model on held-out samples: intra/inter distance ratio.
    const Dataset d = generate_clusters(SynthSpec::entangled(1));
    const auto [train, test] = split(d, 0.5, 1);
    TrainConfig cfg;
    cfg.mode = TrainMode::Benign;
    cfg.epochs = 30;
    cfg.seed = 1;
    const TrainResult r = run_training(train, cfg, &test);
    const double ent = benign_metrics(r.model, test).entanglement;
    EXPECT_GE(ent, 0.6);
    EXPECT_LE(ent, 0.9);
}

TEST(Csv, RoundTrip)
{
    const Dataset d = generate_clusters(SynthSpec::entangled(2));
    const fs::path p = scratch("round.csv");
    save_csv(d, p);
    EXPECT_EQ(load_csv(p), d);
}

TEST(Csv, Errors)
{
    const fs::path empty = scratch("empty.csv");
    write_file(empty, "");
    EXPECT_EQ(kind_of([&] { load_csv(empty); }), ErrorKind::Validation);

    const fs::path out_of_box = scratch("box.csv");
    write_file(out_of_box, "id,label,f0\n1,0,0.1\n2,0,1.5\n3,1,0.2\n4,1,0.3\n");
    try {
        load_csv(out_of_box);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Validation);
        EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
    }

    const fs::path ragged = scratch("ragged.csv");
    write_file(ragged, "id,label,f0,f1\n1,0,0.1,0.2\n2,0,0.3\n");
    EXPECT_EQ(kind_of([&] { load_csv(ragged); }), ErrorKind::Parse);

    const fs::path header = scratch("header.csv");
    write_file(header, "name,label,f0\n1,0,0.1\n");
    EXPECT_EQ(kind_of([&] { load_csv(header); }), ErrorKind::Parse);

    EXPECT_EQ(kind_of([&] { load_csv(scratch("missing.csv")); }), ErrorKind::Io);
}

TEST(Split, StratifiedDisjointDeterministic)
{
    const Dataset d = generate_clusters(SynthSpec::entangled(3));
    const auto [train, test] = split(d, 0.5, 4);
    const auto [train2, test2] = split(d, 0.5, 4);
    EXPECT_EQ(train, train2);
    EXPECT_EQ(test, test2);
    EXPECT_EQ(train.size() + test.size(), d.size());
    std::set<std::uint64_t> ids(train.ids().begin(), train.ids().end());
    for (auto id : test.ids())
        EXPECT_EQ(ids.count(id), 0u);
    const auto a = train.indices_by_class(), b = test.indices_by_class();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t c = 0; c < a.size(); ++c) {
        const auto na = static_cast<long>(a[c].second.size()), nb = static_cast<long>(b[c].second.size());
        EXPECT_LE(std::abs(na - nb), 1);
    }
}

TEST(Split, Guards)
{
    const Dataset d = generate_clusters(SynthSpec::entangled(3));
    EXPECT_EQ(kind_of([&] { split(d, 1.0, 1); }), ErrorKind::Config);
    const Matrix f(6, 1, std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5, 0.6});
    const Dataset small({1, 2, 3, 4, 5, 6}, f, {0, 0, 0, 1, 1, 1}, "t");
    EXPECT_EQ(kind_of([&] { split(small, 0.5, 1); }), ErrorKind::Config);
}

TEST(Fingerprint, Fnv1a)
{
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

} // namespace
} // namespace tride
