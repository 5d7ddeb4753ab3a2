#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "edgelearn/common.hpp"
#include "edgelearn/experiment.hpp"

using namespace edgelearn;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Small, fast blob experiment: 3 classes in 6 dimensions over 3 locations.
exp::ExperimentConfig blob_config() {
    exp::ExperimentConfig cfg;
    cfg.name = "blob_unit";
    cfg.dataset.kind = "synth_blobs";
    cfg.dataset.blob_classes = 3;
    cfg.dataset.blob_dim = 6;
    cfg.dataset.blob_per_class = 60;
    cfg.dataset.blob_separation = 3.0;
    cfg.partition.num_locations = 3;
    cfg.runs = 2;
    cfg.seed = 7;
    cfg.protocol.gtl.kappa = 8;  // candidate pool is d + s = 9 columns
    cfg.protocol.gtl.bag_sample_size = 20;
    cfg.protocol.threads = 2;
    return cfg;
}

fs::path fresh_dir(const std::string& tag) {
    fs::path p = fs::temp_directory_path() / ("edgelearn_" + tag + "_" + std::to_string(getpid()));
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("config survives a JSON round trip") {
    exp::ExperimentConfig cfg = blob_config();
    cfg.holdout_ratio = 0.25;
    cfg.protocol.procedure = proto::Procedure::gtl_limited;
    cfg.protocol.num_aggregators = 2;
    cfg.malicious.mode = proto::MaliciousConfig::Mode::malicious2;
    cfg.malicious.param_probability = 0.4;
    cfg.partition.regime = data::Regime::class_unbalance;
    cfg.partition.underrepresented_classes = {2, 3};
    cfg.partition.depletion_keep = 0.2;
    cfg.meter.indexed_sparse = true;
    cfg.dynamic.batch_size = 5;
    cfg.dynamic.alpha = 0.7;

    auto back = exp::config_from_json(exp::config_to_json(cfg));
    CHECK(back.name == cfg.name);
    CHECK(back.dataset.kind == cfg.dataset.kind);
    CHECK(back.dataset.blob_per_class == cfg.dataset.blob_per_class);
    CHECK(back.holdout_ratio == cfg.holdout_ratio);
    CHECK(back.partition.regime == data::Regime::class_unbalance);
    CHECK(back.partition.underrepresented_classes == cfg.partition.underrepresented_classes);
    CHECK(back.partition.depletion_keep == cfg.partition.depletion_keep);
    CHECK(back.protocol.procedure == proto::Procedure::gtl_limited);
    CHECK(back.protocol.num_aggregators == 2);
    CHECK(back.protocol.gtl.kappa == cfg.protocol.gtl.kappa);
    CHECK(back.protocol.svm.C == cfg.protocol.svm.C);
    CHECK(back.malicious.mode == proto::MaliciousConfig::Mode::malicious2);
    CHECK(back.malicious.param_probability == 0.4);
    CHECK(back.meter.indexed_sparse);
    CHECK(back.dynamic.batch_size == 5);
    CHECK(back.dynamic.alpha == 0.7);
}

TEST_CASE("unknown config keys are rejected by name") {
    json j = exp::config_to_json(blob_config());
    j["bogus_knob"] = 1;
    try {
        exp::config_from_json(j);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("bogus_knob") != std::string::npos);
    }

    json nested = exp::config_to_json(blob_config());
    nested["protocol"]["svm"]["learning_rate"] = 0.1;
    try {
        exp::config_from_json(nested);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("protocol.svm.learning_rate") != std::string::npos);
    }
}

TEST_CASE("validate rejects out-of-range settings") {
    auto bad = blob_config();
    bad.holdout_ratio = 1.0;
    CHECK_THROWS_AS(exp::validate(bad), ConfigError);

    bad = blob_config();
    bad.runs = 0;
    CHECK_THROWS_AS(exp::validate(bad), ConfigError);

    bad = blob_config();
    bad.dataset.kind = "csv";
    CHECK_THROWS_AS(exp::validate(bad), ConfigError);

    bad = blob_config();
    bad.dynamic.alpha = 0.0;
    CHECK_THROWS_AS(exp::validate(bad), ConfigError);

    bad = blob_config();
    bad.protocol.num_aggregators = 99;
    CHECK_THROWS_AS(exp::validate(bad), ConfigError);

    bad = blob_config();
    bad.malicious.node_fraction = 1.5;
    CHECK_THROWS_AS(exp::validate(bad), ConfigError);
}

TEST_CASE("load_pool produces the configured blob corpus") {
    auto cfg = blob_config();
    auto pool = exp::load_pool(cfg.dataset);
    CHECK(pool.size() == std::size_t(3 * 60));
    CHECK(pool.front().features.size() == 6);
    CHECK(data::num_classes(pool) == 3);

    auto again = exp::load_pool(cfg.dataset);
    CHECK(again.size() == pool.size());
    CHECK(again.front().features == pool.front().features);

    cfg.dataset.data_seed += 1;
    auto other = exp::load_pool(cfg.dataset);
    CHECK(other.front().features != pool.front().features);
}

TEST_CASE("run_experiment on blobs: rows, summary and determinism") {
    auto cfg = blob_config();
    auto rep = exp::run_experiment(cfg);

    REQUIRE(!rep.rows.empty());
    CHECK(rep.summary.at("k").get<int>() == 3);
    CHECK(rep.summary.at("s").get<int>() == 3);
    const json& steps = rep.summary.at("steps");
    for (const char* step : {"h0", "gtl_h2", "gtl_mu", "gtl_mv", "cloud"}) {
        REQUIRE(steps.contains(step));
        double f = steps.at(step).at("f_mean").get<double>();
        CHECK(f >= 0.0);
        CHECK(f <= 1.0);
    }
    CHECK(steps.at("gtl_mu").contains("ppg_mean"));

    REQUIRE(rep.summary.contains("overhead"));
    const json& oh = rep.summary.at("overhead").at(0);
    CHECK(oh.at("non_model_payloads").get<int>() == 0);
    for (const auto& line : oh.at("reconciliation").at("lines"))
        CHECK(line.at("residual").get<double>() == doctest::Approx(0.0));

    auto rep2 = exp::run_experiment(cfg);
    REQUIRE(rep2.rows.size() == rep.rows.size());
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        CHECK(rep2.rows[i].step == rep.rows[i].step);
        CHECK(rep2.rows[i].metric == rep.rows[i].metric);
        CHECK(rep2.rows[i].value == rep.rows[i].value);
    }

    auto ci = exp::step_f(rep, "h0");
    CHECK(ci.n == 2);
    CHECK_THROWS_AS(exp::step_f(rep, "warp_drive"), MetricError);
}

TEST_CASE("write_report materializes csv, json and tables") {
    auto cfg = blob_config();
    cfg.runs = 1;
    auto rep = exp::run_experiment(cfg);
    fs::path dir = fresh_dir("report");
    exp::write_report(rep, dir.string());

    CHECK(fs::exists(dir / "metrics.csv"));
    CHECK(fs::exists(dir / "summary.json"));
    CHECK(fs::exists(dir / "tables.txt"));

    std::ifstream csv(dir / "metrics.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "run,location,step,metric,class,value");

    std::ifstream js(dir / "summary.json");
    json parsed;
    js >> parsed;
    CHECK(parsed.at("name") == cfg.name);

    std::string tables = exp::render_tables(rep.summary);
    CHECK(tables.find("h0") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("sweep runs one entry per value and rejects bad axes") {
    auto cfg = blob_config();
    cfg.runs = 1;
    cfg.cloud_baseline = false;
    auto rep = exp::sweep(cfg, "s", {2.0, 3.0});
    REQUIRE(rep.summary.at("entries").size() == 2);
    CHECK(rep.summary.at("sweep_axis") == "s");
    for (const auto& e : rep.summary.at("entries"))
        CHECK(e.at("summary").at("steps").contains("gtl_mu"));

    fs::path dir = fresh_dir("sweep");
    exp::write_report(rep, dir.string());
    CHECK(fs::exists(dir / "sweep.csv"));
    fs::remove_all(dir);

    CHECK_THROWS_AS(exp::sweep(cfg, "s", {}), ConfigError);
    CHECK_THROWS_AS(exp::sweep(cfg, "gravity", {1.0}), ConfigError);
}
