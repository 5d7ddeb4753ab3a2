#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edgelearn/data.hpp"
#include "edgelearn/metrics.hpp"
#include "edgelearn/netsim.hpp"
#include "edgelearn/proto.hpp"

#include "json.hpp"

namespace edgelearn::exp {

// Where the samples come from. Official corpora are used when their
// directories resolve (config value or EDGELEARN_MNIST_DIR/EDGELEARN_HAPT_DIR
// env overrides); otherwise stand-in data with the same file formats, shapes
// and class structure is generated once into standin_dir and consumed through
// the production loaders.
struct DatasetConfig {
    std::string kind = "synth_blobs";  // mnist | hapt | synth_blobs
    std::string dir;
    std::string standin_dir = "standin_data";
    bool allow_standin = true;
    bool hog = true;              // mnist only: 28x28 -> 324 descriptor
    std::size_t subsample_train = 0;  // 0 = keep all
    std::size_t subsample_test = 0;
    double raw_size_mb = 0.0;     // published raw corpus size, for gain columns
    // synth_blobs shape
    int blob_classes = 5;
    int blob_dim = 20;
    int blob_per_class = 200;
    double blob_separation = 2.5;
    std::uint64_t data_seed = 7;  // stand-in / blob generation stream
};

struct ExperimentConfig {
    std::string name = "experiment";
    DatasetConfig dataset;
    data::PartitionSpec partition;  // seed is derived per run
    bool hapt_by_user = true;       // hapt: per-user locations via redistribution
    double holdout_ratio = 0.3;
    int runs = 1;
    std::uint64_t seed = 42;
    proto::ProtocolConfig protocol;
    proto::MaliciousConfig malicious;
    proto::DynamicConfig dynamic;
    bool cloud_baseline = true;
    netsim::MeterConfig meter;
    std::string output_dir = "out";
};

// Strict parsers: unknown keys raise ConfigError naming the key.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
void validate(const ExperimentConfig& cfg);

// Long-format metric row; location/class use -1 when not applicable.
struct MetricRow {
    int run = 0;
    int location = -1;
    std::string step;    // h0 | gtl_h2 | gtl_mu | gtl_mv | nohtl_mu | nohtl_mv | cloud | dyn:<n>
    std::string metric;  // precision | recall | f_measure | ppg | class_acc
    int class_label = -1;
    double value = 0.0;
};

struct ExperimentReport {
    std::string name;
    std::vector<MetricRow> rows;
    nlohmann::json summary;  // step aggregates, overhead, reconciliation, gains, config echo
};

// Loads (or generates) the dataset pool for a config. Exposed for tests.
std::vector<data::Sample> load_pool(const DatasetConfig& cfg);
std::vector<std::pair<int, data::Sample>> load_tagged_hapt(const DatasetConfig& cfg);

ExperimentReport run_experiment(const ExperimentConfig& cfg);

// One sub-run per axis value; axis is one of
//   num_aggregators | malicious_f | malicious_p | s | alpha.
ExperimentReport sweep(const ExperimentConfig& cfg, const std::string& axis,
                       const std::vector<double>& values);

// Serialization: metrics.csv (long rows), summary.json, tables.txt.
void write_report(const ExperimentReport& report, const std::string& out_dir);
std::string render_tables(const nlohmann::json& summary);

// Mean F across runs for one step, from a report.
metrics::MeanCI step_f(const ExperimentReport& report, const std::string& step);

}  // namespace edgelearn::exp
