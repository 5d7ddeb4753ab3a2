#include "doctest.h"

#include <vector>

#include "edgelearn/common.hpp"
#include "edgelearn/multiclass.hpp"
#include "edgelearn/svm.hpp"

using namespace edgelearn;

namespace {

LinearModel raw_model(std::vector<double> w, double b) {
    LinearModel m = LinearModel::zeros(w.size(), 0, ModelKind::base, "raw:" + std::to_string(w.size()));
    for (std::size_t i = 0; i < w.size(); ++i) m.coef[i] = w[i];
    m.intercept() = b;
    return m;
}

}  // namespace

TEST_CASE("one-hot codebook rows are distinct and signed correctly") {
    multiclass::CodeBook book(4);
    CHECK(book.entry(2, 1) == +1);
    CHECK(book.entry(2, 0) == -1);
    auto row = book.row(3);
    CHECK(row == std::vector<int>{-1, -1, +1, -1});
}

TEST_CASE("decoding picks the row with least hinge disagreement") {
    CHECK(multiclass::decode({-1, +1, -1}) == 2);
    // Two equally good rows tie to the lowest class.
    CHECK(multiclass::decode({+1, +1, -1}) == 1);
    // All-rejections are equidistant from every row: lowest class wins.
    CHECK(multiclass::decode({-1, -1, -1}) == 1);
}

TEST_CASE("decoding inverts the codebook for every class") {
    for (int k = 2; k <= 12; ++k) {
        multiclass::CodeBook book(k);
        for (int c = 1; c <= k; ++c) CHECK(multiclass::decode(book.row(c), book) == c);
    }
}

TEST_CASE("margin signs feed the decoder with sign(0) = +1") {
    CHECK(multiclass::decode_margins({-0.5, 0.0, -2.0}) == 2);
    CHECK(multiclass::decode_margins({0.3, -0.1}) == 1);
}

TEST_CASE("train_ova passes one-vs-all targets to the binary trainer") {
    std::vector<data::Sample> samples = {{{0.0}, 1}, {{1.0}, 2}, {{2.0}, 3}};
    std::vector<std::vector<int>> seen;
    auto clf = multiclass::train_ova(samples, 3, [&](int cls, const std::vector<int>& t) {
        seen.push_back(t);
        return raw_model({double(cls)}, 0.0);
    });
    REQUIRE(seen.size() == 3);
    CHECK(seen[0] == std::vector<int>{+1, -1, -1});
    CHECK(seen[1] == std::vector<int>{-1, +1, -1});
    CHECK(seen[2] == std::vector<int>{-1, -1, +1});
    CHECK(clf.num_classes() == 3);
    CHECK_THROWS_AS(
        multiclass::train_ova(samples, 1, [&](int, const std::vector<int>&) {
            return raw_model({1.0}, 0.0);
        }),
        ConfigError);
}

TEST_CASE("raw prediction decodes per-class margins") {
    multiclass::OvaClassifier clf;
    clf.models.push_back(raw_model({1.0}, -0.5));   // class 1: positive for x > 0.5
    clf.models.push_back(raw_model({-1.0}, 0.5));   // class 2: positive for x < 0.5
    double lo = 0.0, hi = 1.0;
    CHECK(multiclass::predict(clf, &hi, 1) == 1);
    CHECK(multiclass::predict(clf, &lo, 1) == 2);
}

TEST_CASE("source margin table stores clipped per-class source predictions") {
    std::vector<learn::SourceSet> per_class(1);
    per_class[0].push_back(raw_model({10.0}, 0.0));  // huge margins, clipped at 1
    std::vector<data::Sample> pts = {{{1.0}, 1}, {{-1.0}, 1}};
    auto table = multiclass::build_source_margin_table(per_class, pts, 1.0);
    REQUIRE(table.num_points == 2);
    CHECK(table.margins[0][0][0] == doctest::Approx(1.0));
    CHECK(table.margins[0][0][1] == doctest::Approx(-1.0));

    auto unclipped = multiclass::build_source_margin_table(per_class, pts, 0.0);
    CHECK(unclipped.margins[0][0][0] == doctest::Approx(10.0));
}

TEST_CASE("augmented models predict through the table") {
    // One class-1 model with beta = 1 on a source that fires for x > 0, plus
    // a class-2 model that fires for x < 0.
    LinearModel m1 = LinearModel::zeros(1, 1, ModelKind::gtl, "raw:1");
    m1.coef[1] = 1.0;  // beta on the only source
    LinearModel m2 = raw_model({-1.0}, 0.0);

    std::vector<learn::SourceSet> per_class(2);
    per_class[0].push_back(raw_model({1.0}, 0.0));
    per_class[1].push_back(raw_model({1.0}, 0.0));

    multiclass::OvaClassifier clf;
    clf.models = {m1, m2};
    std::vector<data::Sample> pts = {{{0.7}, 1}, {{-0.7}, 1}};
    auto table = multiclass::build_source_margin_table(per_class, pts, 1.0);
    auto preds = multiclass::predict_all(clf, pts, table);
    CHECK(preds == std::vector<int>{1, 2});
}

TEST_CASE("consensus mean averages coefficients and rejects shape mismatches") {
    auto a = raw_model({2.0, 0.0}, 1.0);
    auto b = raw_model({0.0, 4.0}, 3.0);
    auto mean = multiclass::consensus_mean(std::vector<LinearModel>{a, b});
    CHECK(mean.coef[0] == doctest::Approx(1.0));
    CHECK(mean.coef[1] == doctest::Approx(2.0));
    CHECK(mean.intercept() == doctest::Approx(2.0));
    CHECK(mean.kind == ModelKind::aggregate);

    auto c = raw_model({1.0}, 0.0);
    CHECK_THROWS_AS(multiclass::consensus_mean(std::vector<LinearModel>{a, c}), DimensionError);
    CHECK_THROWS_AS(multiclass::consensus_mean(std::vector<LinearModel>{}), ConfigError);
}

TEST_CASE("majority vote ties break to the lowest label") {
    CHECK(multiclass::majority_vote({2, 2, 3}) == 2);
    CHECK(multiclass::majority_vote({1, 2}) == 1);
    CHECK(multiclass::majority_vote({3, 2, 3, 2}) == 2);
    CHECK(multiclass::majority_vote({5}) == 5);
    CHECK_THROWS_AS(multiclass::majority_vote({}), ConfigError);
}
