#include "doctest.h"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "edgelearn/common.hpp"
#include "edgelearn/data.hpp"

namespace fs = std::filesystem;
using namespace edgelearn;

namespace {

fs::path fresh_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("edgelearn_tests_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void put_u32_be(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {(unsigned char)(v >> 24), (unsigned char)(v >> 16),
                          (unsigned char)(v >> 8), (unsigned char)v};
    out.write(reinterpret_cast<char*>(b), 4);
}

// Two 2x2 images: {0,255,0,255} labelled 3 and {255,0,0,0} labelled 0.
void write_idx_fixture(const fs::path& dir, std::uint32_t image_magic = 0x803,
                       std::uint32_t label_magic = 0x801, bool truncate_pixels = false,
                       unsigned char second_label = 0) {
    std::ofstream img(dir / "train-images-idx3-ubyte", std::ios::binary);
    put_u32_be(img, image_magic);
    put_u32_be(img, 2);
    put_u32_be(img, 2);
    put_u32_be(img, 2);
    unsigned char pixels[8] = {0, 255, 0, 255, 255, 0, 0, 0};
    img.write(reinterpret_cast<char*>(pixels), truncate_pixels ? 5 : 8);
    img.close();

    std::ofstream lab(dir / "train-labels-idx1-ubyte", std::ios::binary);
    put_u32_be(lab, label_magic);
    put_u32_be(lab, 2);
    unsigned char labels[2] = {3, second_label};
    lab.write(reinterpret_cast<char*>(labels), 2);
}

void write_hapt_fixture(const fs::path& dir) {
    std::ofstream X(dir / "X.txt");
    X << "0.5 1.0 -0.25\n1.5 2.0 0.0\n-1 0 1\n0 0 0\n";
    std::ofstream y(dir / "y.txt");
    y << "1\n2\n1\n2\n";
    std::ofstream subj(dir / "subject_id.txt");
    subj << "7\n7\n9\n9\n";
}

std::vector<data::Sample> labelled_pool(const std::vector<int>& counts) {
    // counts[c-1] samples of class c; feature[0] is a unique id.
    std::vector<data::Sample> pool;
    double id = 0.0;
    for (std::size_t c = 0; c < counts.size(); ++c)
        for (int i = 0; i < counts[c]; ++i)
            pool.push_back({{id++, double(c)}, int(c) + 1});
    return pool;
}

std::multiset<double> ids_of(const std::vector<data::LocalDataset>& locs) {
    std::multiset<double> ids;
    for (const auto& l : locs)
        for (const auto& s : l.samples) ids.insert(s.features[0]);
    return ids;
}

}  // namespace

TEST_CASE("IDX loader parses images and labels") {
    auto dir = fresh_dir("idx_ok");
    write_idx_fixture(dir);
    auto pool = data::load_mnist((dir / "train-images-idx3-ubyte").string(),
                                 (dir / "train-labels-idx1-ubyte").string());
    REQUIRE(pool.size() == 2);
    CHECK(pool[0].features.size() == 4);
    CHECK(pool[0].features[0] == doctest::Approx(0.0));
    CHECK(pool[0].features[1] == doctest::Approx(1.0));
    CHECK(pool[0].label == 4);  // digit 3 -> class 4
    CHECK(pool[1].label == 1);  // digit 0 -> class 1
    // Directory variant finds the official file names.
    CHECK(data::load_mnist_dir(dir.string()).size() == 2);
}

TEST_CASE("IDX loader rejects malformed files") {
    auto bad_magic = fresh_dir("idx_bad_magic");
    write_idx_fixture(bad_magic, 0x123);
    CHECK_THROWS_AS(data::load_mnist_dir(bad_magic.string()), FormatError);

    auto bad_label_magic = fresh_dir("idx_bad_lmagic");
    write_idx_fixture(bad_label_magic, 0x803, 0x999);
    CHECK_THROWS_AS(data::load_mnist_dir(bad_label_magic.string()), FormatError);

    auto truncated = fresh_dir("idx_truncated");
    write_idx_fixture(truncated, 0x803, 0x801, true);
    CHECK_THROWS_AS(data::load_mnist_dir(truncated.string()), FormatError);

    CHECK_THROWS_AS(data::load_mnist("/nonexistent/images", "/nonexistent/labels"), FormatError);
}

TEST_CASE("HAPT text loader parses the merged layout") {
    auto dir = fresh_dir("hapt_ok");
    write_hapt_fixture(dir);
    auto tagged = data::load_hapt_dir(dir.string());
    REQUIRE(tagged.size() == 4);
    CHECK(tagged[0].first == 7);
    CHECK(tagged[0].second.features == std::vector<double>{0.5, 1.0, -0.25});
    CHECK(tagged[0].second.label == 1);
    CHECK(tagged[3].first == 9);
    CHECK(tagged[3].second.label == 2);
}

TEST_CASE("HAPT loader rejects ragged rows and count mismatches") {
    auto ragged = fresh_dir("hapt_ragged");
    {
        std::ofstream X(ragged / "X.txt");
        X << "1 2 3\n4 5\n";
        std::ofstream y(ragged / "y.txt");
        y << "1\n2\n";
        std::ofstream subj(ragged / "subject_id.txt");
        subj << "1\n1\n";
    }
    CHECK_THROWS_AS(data::load_hapt_dir(ragged.string()), FormatError);

    auto short_labels = fresh_dir("hapt_short_labels");
    {
        std::ofstream X(short_labels / "X.txt");
        X << "1 2\n3 4\n";
        std::ofstream y(short_labels / "y.txt");
        y << "1\n";
        std::ofstream subj(short_labels / "subject_id.txt");
        subj << "1\n1\n";
    }
    CHECK_THROWS_AS(data::load_hapt_dir(short_labels.string()), FormatError);

    auto bad_label = fresh_dir("hapt_bad_label");
    {
        std::ofstream X(bad_label / "X.txt");
        X << "1 2\n";
        std::ofstream y(bad_label / "y.txt");
        y << "0\n";
        std::ofstream subj(bad_label / "subject_id.txt");
        subj << "1\n";
    }
    CHECK_THROWS_AS(data::load_hapt_dir(bad_label.string()), FormatError);
}

TEST_CASE("hapt_redistribute keeps complete users and spreads the rest") {
    // Users 1 and 2 hold both classes; user 3 only class 1.
    std::vector<std::pair<int, data::Sample>> tagged = {
        {1, {{0.0}, 1}}, {1, {{1.0}, 2}}, {2, {{2.0}, 1}}, {2, {{3.0}, 2}},
        {3, {{4.0}, 1}}, {3, {{5.0}, 1}},
    };
    auto locs = data::hapt_redistribute(tagged, 99);
    REQUIRE(locs.size() == 2);
    std::size_t total = locs[0].size() + locs[1].size();
    CHECK(total == tagged.size());
    // Each kept user keeps its own samples.
    CHECK(locs[0].size() >= 2);
    CHECK(locs[1].size() >= 2);
    // Deterministic under the same seed.
    auto again = data::hapt_redistribute(tagged, 99);
    CHECK(again[0].size() == locs[0].size());

    // Fewer than two complete users is an error.
    std::vector<std::pair<int, data::Sample>> lonely = {
        {1, {{0.0}, 1}}, {1, {{1.0}, 2}}, {2, {{2.0}, 1}}};
    CHECK_THROWS_AS(data::hapt_redistribute(lonely, 1), ConfigError);
}

TEST_CASE("balanced partition deals every sample once with even class shares") {
    auto pool = labelled_pool({20, 20, 20});
    data::PartitionSpec spec;
    spec.regime = data::Regime::balanced;
    spec.num_locations = 4;
    spec.seed = 5;
    auto locs = data::partition(pool, spec);
    REQUIRE(locs.size() == 4);
    CHECK(ids_of(locs).size() == pool.size());
    // Coverage: every id exactly once.
    std::multiset<double> expect;
    for (const auto& s : pool) expect.insert(s.features[0]);
    CHECK(ids_of(locs) == expect);
    // Per-location class histograms equal up to +-1 (here exactly 5 each).
    for (const auto& l : locs) {
        std::map<int, int> hist;
        for (const auto& s : l.samples) hist[s.label]++;
        for (int c = 1; c <= 3; ++c) CHECK(hist[c] == 5);
    }
}

TEST_CASE("class_unbalance keeps the configured fraction of depleted classes") {
    auto pool = labelled_pool({40, 40, 40});
    data::PartitionSpec spec;
    spec.regime = data::Regime::class_unbalance;
    spec.num_locations = 2;
    spec.underrepresented_classes = {3};
    spec.depletion_keep = 0.1;
    spec.seed = 6;
    auto locs = data::partition(pool, spec);
    std::map<int, int> hist;
    for (const auto& l : locs)
        for (const auto& s : l.samples) hist[s.label]++;
    CHECK(hist[1] == 40);
    CHECK(hist[2] == 40);
    CHECK(hist[3] == 4);  // llround(0.1 * 40)
}

TEST_CASE("node_unbalance rotates the dominant class and covers the pool") {
    auto pool = labelled_pool({40, 40});
    data::PartitionSpec spec;
    spec.regime = data::Regime::node_unbalance;
    spec.num_locations = 4;
    spec.dominant_fraction = 0.7;
    spec.seed = 8;
    auto locs = data::partition(pool, spec);
    REQUIRE(locs.size() == 4);
    std::multiset<double> expect;
    for (const auto& s : pool) expect.insert(s.features[0]);
    CHECK(ids_of(locs) == expect);
    // Dominant class rotates 1,2,1,2; each dominant share is
    // llround(0.7 * 80/4) = 14 samples.
    for (int l = 0; l < 4; ++l) {
        int dom = (l % 2) + 1;
        int dom_count = 0;
        for (const auto& s : locs[l].samples)
            if (s.label == dom) ++dom_count;
        CHECK(dom_count == 14);
    }

    // Asking for more dominant samples than the class holds must fail.
    data::PartitionSpec hungry = spec;
    hungry.dominant_fraction = 0.99;
    hungry.num_locations = 2;
    auto tiny = labelled_pool({10, 90});
    CHECK_THROWS_AS(data::partition(tiny, hungry), ConfigError);

    // Fewer locations than classes cannot rotate a dominant class each.
    data::PartitionSpec narrow = spec;
    narrow.num_locations = 1;
    CHECK_THROWS_AS(data::partition(pool, narrow), ConfigError);
}

TEST_CASE("holdout splits by llround and is seed-deterministic") {
    auto pool = labelled_pool({50, 50});
    auto split = data::holdout(pool, 0.3, 42);
    CHECK(split.test.size() == 30);
    CHECK(split.train.size() == 70);
    auto split2 = data::holdout(pool, 0.3, 42);
    CHECK(split2.test[0].features[0] == split.test[0].features[0]);
    auto split3 = data::holdout(pool, 0.3, 43);
    bool same = true;
    for (std::size_t i = 0; i < split.test.size() && same; ++i)
        same = split3.test[i].features[0] == split.test[i].features[0];
    CHECK_FALSE(same);
    CHECK_THROWS_AS(data::holdout(pool, 0.0, 1), ConfigError);
    CHECK_THROWS_AS(data::holdout(pool, 1.0, 1), ConfigError);
}

TEST_CASE("subsample returns n distinct pool members") {
    auto pool = labelled_pool({30, 30});
    auto sub = data::subsample(pool, 10, 3);
    CHECK(sub.size() == 10);
    std::set<double> seen;
    for (const auto& s : sub) seen.insert(s.features[0]);
    CHECK(seen.size() == 10);
    auto again = data::subsample(pool, 10, 3);
    for (std::size_t i = 0; i < 10; ++i)
        CHECK(again[i].features[0] == sub[i].features[0]);
}

TEST_CASE("scaler computes population z-scores and guards zero variance") {
    std::vector<data::Sample> samples = {{{0.0, 5.0}, 1}, {{2.0, 5.0}, 1}};
    auto sc = data::Scaler::fit(samples);
    REQUIRE(sc.mean.size() == 2);
    CHECK(sc.mean[0] == doctest::Approx(1.0));
    CHECK(sc.inv_std[0] == doctest::Approx(1.0));  // population sigma = 1
    CHECK(sc.inv_std[1] == doctest::Approx(1.0));  // zero variance -> 1.0
    double out[2];
    sc.transform(samples[0].features.data(), out);
    CHECK(out[0] == doctest::Approx(-1.0));
    CHECK(out[1] == doctest::Approx(0.0));

    auto off = data::Scaler::fit(samples, false);
    CHECK_FALSE(off.enabled);
    off.transform(samples[0].features.data(), out);
    CHECK(out[0] == doctest::Approx(0.0));
    CHECK(out[1] == doctest::Approx(5.0));
}

TEST_CASE("synthetic digit corpus round-trips through the IDX loader") {
    auto dir = fresh_dir("synth_mnist");
    data::SynthDigitsConfig cfg;
    cfg.per_class = 3;
    cfg.seed = 17;
    data::write_synth_mnist(dir.string(), cfg);
    auto pool = data::load_mnist_dir(dir.string());
    REQUIRE(pool.size() == 30);
    CHECK(data::num_classes(pool) == 10);
    for (const auto& s : pool) {
        CHECK(s.features.size() == 784);
        for (double v : s.features) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
    // Regenerating with the same seed produces the same bytes.
    auto again = fresh_dir("synth_mnist2");
    data::write_synth_mnist(again.string(), cfg);
    auto pool2 = data::load_mnist_dir(again.string());
    CHECK(pool2[0].features == pool[0].features);
}

TEST_CASE("synthetic activity corpus round-trips through the text loader") {
    auto dir = fresh_dir("synth_hapt");
    data::SynthHaptConfig cfg;
    cfg.num_users = 5;
    cfg.total_samples = 100;
    cfg.seed = 23;
    data::write_synth_hapt(dir.string(), cfg);
    auto tagged = data::load_hapt_dir(dir.string());
    REQUIRE(tagged.size() == 100);
    std::map<int, std::set<int>> classes_by_user;
    for (const auto& [user, s] : tagged) {
        CHECK(s.features.size() == 561);
        CHECK(s.label >= 1);
        CHECK(s.label <= 12);
        CHECK(user >= 1);
        CHECK(user <= 5);
        classes_by_user[user].insert(s.label);
    }
    // Every user covers every class, so redistribution keeps all of them.
    for (const auto& [user, classes] : classes_by_user) CHECK(classes.size() == 12);
    auto locs = data::hapt_redistribute(tagged, 1);
    CHECK(locs.size() == 5);
}

TEST_CASE("export_csv writes one row per sample") {
    auto dir = fresh_dir("export");
    std::vector<data::LocalDataset> locs(1);
    locs[0].location_id = 0;
    locs[0].samples = {{{1.5, 2.5}, 1}, {{3.0, 4.0}, 2}};
    auto path = (dir / "data.csv").string();
    data::export_csv(path, locs);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "f1,f2,label,location");
    int rows = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 2);
}
