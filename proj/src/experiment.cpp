#include "edgelearn/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>

#include "edgelearn/common.hpp"
#include "edgelearn/hog.hpp"

namespace edgelearn::exp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Seed stream tags; every randomized stage of a run draws from its own
// derived stream so no stage can perturb another.
constexpr std::uint64_t kHoldTag = 0x484f4c44;   // holdout shuffle
constexpr std::uint64_t kSubTrTag = 0x53554254;  // train subsample
constexpr std::uint64_t kSubTeTag = 0x53554245;  // test subsample
constexpr std::uint64_t kPartTag = 0x50415254;   // partition / redistribution
constexpr std::uint64_t kProtoTag = 0x50524f54;  // protocol-internal streams
constexpr std::uint64_t kMalTag = 0x4d4c4353;    // malicious streams
constexpr std::uint64_t kCloudTag = 0x434c4455;  // centralized baseline

// Stand-in corpus shapes. MNIST stand-in is big enough for every desk-scale
// preset after holdout and subsampling; HAPT stand-in mirrors the real
// cardinality because user redistribution depends on it.
constexpr int kStandinMnistPerClass = 1200;

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return (v && *v) ? std::string(v) : fallback;
}

bool mnist_present(const std::string& dir) {
    if (dir.empty()) return false;
    return fs::exists(fs::path(dir) / "train-images-idx3-ubyte") ||
           fs::exists(fs::path(dir) / "train-images.idx3-ubyte");
}

bool hapt_present(const std::string& dir) {
    if (dir.empty()) return false;
    return fs::exists(fs::path(dir) / "X.txt") ||
           fs::exists(fs::path(dir) / "Train" / "X_train.txt");
}

// ---------------------------------------------------------------------------
// config parsing

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
    if (!j.is_object()) throw ConfigError("config section '" + where + "' must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* a : allowed)
            if (it.key() == a) {
                known = true;
                break;
            }
        if (!known) throw ConfigError("unknown config key '" + where + "." + it.key() + "'");
    }
}

template <typename T>
void read_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) j.at(key).get_to(out);
}

proto::MaliciousConfig::Mode malicious_mode_from_string(const std::string& s) {
    if (s == "none") return proto::MaliciousConfig::Mode::none;
    if (s == "malicious1") return proto::MaliciousConfig::Mode::malicious1;
    if (s == "malicious2") return proto::MaliciousConfig::Mode::malicious2;
    throw ConfigError("unknown malicious mode '" + s + "'");
}

std::string to_string(proto::MaliciousConfig::Mode m) {
    switch (m) {
        case proto::MaliciousConfig::Mode::none: return "none";
        case proto::MaliciousConfig::Mode::malicious1: return "malicious1";
        default: return "malicious2";
    }
}

DatasetConfig dataset_from_json(const json& j) {
    check_keys(j,
               {"kind", "dir", "standin_dir", "allow_standin", "hog", "subsample_train",
                "subsample_test", "raw_size_mb", "blob_classes", "blob_dim", "blob_per_class",
                "blob_separation", "data_seed"},
               "dataset");
    DatasetConfig d;
    read_if(j, "kind", d.kind);
    read_if(j, "dir", d.dir);
    read_if(j, "standin_dir", d.standin_dir);
    read_if(j, "allow_standin", d.allow_standin);
    read_if(j, "hog", d.hog);
    read_if(j, "subsample_train", d.subsample_train);
    read_if(j, "subsample_test", d.subsample_test);
    read_if(j, "raw_size_mb", d.raw_size_mb);
    read_if(j, "blob_classes", d.blob_classes);
    read_if(j, "blob_dim", d.blob_dim);
    read_if(j, "blob_per_class", d.blob_per_class);
    read_if(j, "blob_separation", d.blob_separation);
    read_if(j, "data_seed", d.data_seed);
    return d;
}

data::PartitionSpec partition_from_json(const json& j) {
    check_keys(j,
               {"regime", "num_locations", "dominant_fraction", "underrepresented_classes",
                "depletion_keep"},
               "partition");
    data::PartitionSpec p;
    if (j.contains("regime")) p.regime = data::regime_from_string(j.at("regime").get<std::string>());
    read_if(j, "num_locations", p.num_locations);
    read_if(j, "dominant_fraction", p.dominant_fraction);
    read_if(j, "depletion_keep", p.depletion_keep);
    if (j.contains("underrepresented_classes"))
        for (const auto& c : j.at("underrepresented_classes"))
            p.underrepresented_classes.insert(c.get<int>());
    return p;
}

proto::ProtocolConfig protocol_from_json(const json& j) {
    check_keys(j,
               {"procedure", "num_aggregators", "random_aggregators", "collector_id", "svm",
                "greedytl", "standardize", "num_classes", "threads"},
               "protocol");
    proto::ProtocolConfig p;
    if (j.contains("procedure"))
        p.procedure = proto::procedure_from_string(j.at("procedure").get<std::string>());
    read_if(j, "num_aggregators", p.num_aggregators);
    read_if(j, "random_aggregators", p.random_aggregators);
    read_if(j, "collector_id", p.collector_id);
    read_if(j, "standardize", p.standardize);
    read_if(j, "num_classes", p.num_classes);
    read_if(j, "threads", p.threads);
    if (j.contains("svm")) {
        const json& s = j.at("svm");
        check_keys(s, {"C", "max_epochs", "tol"}, "protocol.svm");
        read_if(s, "C", p.svm.C);
        read_if(s, "max_epochs", p.svm.max_epochs);
        read_if(s, "tol", p.svm.tol);
    }
    if (j.contains("greedytl")) {
        const json& g = j.at("greedytl");
        check_keys(g, {"lambda", "kappa", "bag_sample_size", "bag_count", "source_clip"},
                   "protocol.greedytl");
        read_if(g, "lambda", p.gtl.lambda);
        read_if(g, "kappa", p.gtl.kappa);
        read_if(g, "bag_sample_size", p.gtl.bag_sample_size);
        read_if(g, "bag_count", p.gtl.bag_count);
        read_if(g, "source_clip", p.gtl.source_clip);
    }
    return p;
}

proto::MaliciousConfig malicious_from_json(const json& j) {
    check_keys(j, {"mode", "node_fraction", "param_probability", "corrupt_step3"}, "malicious");
    proto::MaliciousConfig m;
    if (j.contains("mode")) m.mode = malicious_mode_from_string(j.at("mode").get<std::string>());
    read_if(j, "node_fraction", m.node_fraction);
    read_if(j, "param_probability", m.param_probability);
    read_if(j, "corrupt_step3", m.corrupt_step3);
    return m;
}

netsim::MeterConfig meter_from_json(const json& j) {
    check_keys(j, {"eps_zero", "bytes_per_coeff", "indexed_sparse", "record_rows"}, "meter");
    netsim::MeterConfig m;
    read_if(j, "eps_zero", m.eps_zero);
    read_if(j, "bytes_per_coeff", m.bytes_per_coeff);
    read_if(j, "indexed_sparse", m.indexed_sparse);
    read_if(j, "record_rows", m.record_rows);
    return m;
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
    check_keys(j,
               {"name", "dataset", "partition", "hapt_by_user", "holdout_ratio", "runs", "seed",
                "protocol", "malicious", "dynamic", "cloud_baseline", "meter", "output_dir"},
               "<root>");
    ExperimentConfig cfg;
    read_if(j, "name", cfg.name);
    if (j.contains("dataset")) cfg.dataset = dataset_from_json(j.at("dataset"));
    if (j.contains("partition")) cfg.partition = partition_from_json(j.at("partition"));
    read_if(j, "hapt_by_user", cfg.hapt_by_user);
    read_if(j, "holdout_ratio", cfg.holdout_ratio);
    read_if(j, "runs", cfg.runs);
    read_if(j, "seed", cfg.seed);
    if (j.contains("protocol")) cfg.protocol = protocol_from_json(j.at("protocol"));
    if (j.contains("malicious")) cfg.malicious = malicious_from_json(j.at("malicious"));
    if (j.contains("dynamic")) {
        const json& d = j.at("dynamic");
        check_keys(d, {"batch_size", "alpha"}, "dynamic");
        read_if(d, "batch_size", cfg.dynamic.batch_size);
        read_if(d, "alpha", cfg.dynamic.alpha);
    }
    read_if(j, "cloud_baseline", cfg.cloud_baseline);
    if (j.contains("meter")) cfg.meter = meter_from_json(j.at("meter"));
    read_if(j, "output_dir", cfg.output_dir);
    validate(cfg);
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    return config_from_json(j);
}

json config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["name"] = cfg.name;
    j["dataset"] = {{"kind", cfg.dataset.kind},
                    {"dir", cfg.dataset.dir},
                    {"standin_dir", cfg.dataset.standin_dir},
                    {"allow_standin", cfg.dataset.allow_standin},
                    {"hog", cfg.dataset.hog},
                    {"subsample_train", cfg.dataset.subsample_train},
                    {"subsample_test", cfg.dataset.subsample_test},
                    {"raw_size_mb", cfg.dataset.raw_size_mb},
                    {"blob_classes", cfg.dataset.blob_classes},
                    {"blob_dim", cfg.dataset.blob_dim},
                    {"blob_per_class", cfg.dataset.blob_per_class},
                    {"blob_separation", cfg.dataset.blob_separation},
                    {"data_seed", cfg.dataset.data_seed}};
    j["partition"] = {{"regime", data::to_string(cfg.partition.regime)},
                      {"num_locations", cfg.partition.num_locations},
                      {"dominant_fraction", cfg.partition.dominant_fraction},
                      {"underrepresented_classes",
                       std::vector<int>(cfg.partition.underrepresented_classes.begin(),
                                        cfg.partition.underrepresented_classes.end())},
                      {"depletion_keep", cfg.partition.depletion_keep}};
    j["hapt_by_user"] = cfg.hapt_by_user;
    j["holdout_ratio"] = cfg.holdout_ratio;
    j["runs"] = cfg.runs;
    j["seed"] = cfg.seed;
    j["protocol"] = {{"procedure", proto::to_string(cfg.protocol.procedure)},
                     {"num_aggregators", cfg.protocol.num_aggregators},
                     {"random_aggregators", cfg.protocol.random_aggregators},
                     {"collector_id", cfg.protocol.collector_id},
                     {"svm",
                      {{"C", cfg.protocol.svm.C},
                       {"max_epochs", cfg.protocol.svm.max_epochs},
                       {"tol", cfg.protocol.svm.tol}}},
                     {"greedytl",
                      {{"lambda", cfg.protocol.gtl.lambda},
                       {"kappa", cfg.protocol.gtl.kappa},
                       {"bag_sample_size", cfg.protocol.gtl.bag_sample_size},
                       {"bag_count", cfg.protocol.gtl.bag_count},
                       {"source_clip", cfg.protocol.gtl.source_clip}}},
                     {"standardize", cfg.protocol.standardize},
                     {"num_classes", cfg.protocol.num_classes},
                     {"threads", cfg.protocol.threads}};
    j["malicious"] = {{"mode", to_string(cfg.malicious.mode)},
                      {"node_fraction", cfg.malicious.node_fraction},
                      {"param_probability", cfg.malicious.param_probability},
                      {"corrupt_step3", cfg.malicious.corrupt_step3}};
    j["dynamic"] = {{"batch_size", cfg.dynamic.batch_size}, {"alpha", cfg.dynamic.alpha}};
    j["cloud_baseline"] = cfg.cloud_baseline;
    j["meter"] = {{"eps_zero", cfg.meter.eps_zero},
                  {"bytes_per_coeff", cfg.meter.bytes_per_coeff},
                  {"indexed_sparse", cfg.meter.indexed_sparse},
                  {"record_rows", cfg.meter.record_rows}};
    j["output_dir"] = cfg.output_dir;
    return j;
}

void validate(const ExperimentConfig& cfg) {
    const DatasetConfig& d = cfg.dataset;
    if (d.kind != "mnist" && d.kind != "hapt" && d.kind != "synth_blobs")
        throw ConfigError("dataset.kind must be mnist, hapt or synth_blobs, got '" + d.kind + "'");
    if (d.kind == "synth_blobs" &&
        (d.blob_classes < 2 || d.blob_dim < 1 || d.blob_per_class < 1))
        throw ConfigError("synth_blobs shape parameters must be positive (k >= 2)");
    if (d.raw_size_mb < 0) throw ConfigError("dataset.raw_size_mb must be non-negative");
    if (!(cfg.holdout_ratio > 0.0 && cfg.holdout_ratio < 1.0))
        throw ConfigError("holdout_ratio must lie strictly between 0 and 1");
    if (cfg.runs < 1) throw ConfigError("runs must be at least 1");

    const data::PartitionSpec& p = cfg.partition;
    bool by_user = d.kind == "hapt" && cfg.hapt_by_user;
    if (!by_user && p.num_locations < 2)
        throw ConfigError("partition.num_locations must be at least 2");
    if (!(p.dominant_fraction > 0.0 && p.dominant_fraction < 1.0))
        throw ConfigError("partition.dominant_fraction must lie strictly between 0 and 1");
    if (!(p.depletion_keep > 0.0 && p.depletion_keep <= 1.0))
        throw ConfigError("partition.depletion_keep must lie in (0, 1]");
    for (int c : p.underrepresented_classes)
        if (c < 1) throw ConfigError("underrepresented class labels are 1-based");
    if (by_user && d.subsample_train > 0)
        throw ConfigError("subsample_train is not available with per-user locations");

    const proto::ProtocolConfig& pr = cfg.protocol;
    if (pr.svm.C <= 0) throw ConfigError("protocol.svm.C must be positive");
    if (pr.svm.max_epochs < 1) throw ConfigError("protocol.svm.max_epochs must be positive");
    if (pr.svm.tol <= 0) throw ConfigError("protocol.svm.tol must be positive");
    if (pr.gtl.lambda <= 0) throw ConfigError("protocol.greedytl.lambda must be positive");
    if (pr.gtl.kappa < 0) throw ConfigError("protocol.greedytl.kappa must be non-negative");
    if (pr.gtl.bag_sample_size < 1)
        throw ConfigError("protocol.greedytl.bag_sample_size must be positive");
    if (pr.gtl.bag_count < 0) throw ConfigError("protocol.greedytl.bag_count must be non-negative");
    if (pr.num_aggregators < 0)
        throw ConfigError("protocol.num_aggregators must be non-negative");
    if (!by_user) {
        if (pr.num_aggregators > p.num_locations)
            throw ConfigError("protocol.num_aggregators exceeds the number of locations");
        if (pr.collector_id < 0 || pr.collector_id >= p.num_locations)
            throw ConfigError("protocol.collector_id out of range");
    } else if (pr.collector_id < 0) {
        throw ConfigError("protocol.collector_id out of range");
    }

    const proto::MaliciousConfig& m = cfg.malicious;
    if (m.node_fraction < 0.0 || m.node_fraction > 1.0)
        throw ConfigError("malicious.node_fraction must lie in [0, 1]");
    if (m.param_probability < 0.0 || m.param_probability > 1.0)
        throw ConfigError("malicious.param_probability must lie in [0, 1]");

    if (cfg.dynamic.batch_size < 1) throw ConfigError("dynamic.batch_size must be positive");
    if (!(cfg.dynamic.alpha > 0.0 && cfg.dynamic.alpha <= 1.0))
        throw ConfigError("dynamic.alpha must lie in (0, 1]");

    if (cfg.meter.bytes_per_coeff == 0) throw ConfigError("meter.bytes_per_coeff must be positive");
    if (cfg.meter.eps_zero < 0) throw ConfigError("meter.eps_zero must be non-negative");
}

// ---------------------------------------------------------------------------
// dataset resolution

std::vector<std::pair<int, data::Sample>> load_tagged_hapt(const DatasetConfig& cfg) {
    std::string dir = env_or("EDGELEARN_HAPT_DIR", cfg.dir);
    if (!hapt_present(dir)) {
        if (!cfg.allow_standin)
            throw ConfigError("hapt: no dataset found at '" + dir +
                              "' and stand-in generation is disabled");
        dir = (fs::path(cfg.standin_dir) / "hapt").string();
        if (!hapt_present(dir)) {
            data::SynthHaptConfig sc;
            sc.seed = cfg.data_seed;
            data::write_synth_hapt(dir, sc);
        }
    }
    return data::load_hapt_dir(dir);
}

std::vector<data::Sample> load_pool(const DatasetConfig& cfg) {
    if (cfg.kind == "synth_blobs")
        return data::synth_blobs(cfg.blob_classes, cfg.blob_dim, cfg.blob_per_class,
                                 cfg.blob_separation, cfg.data_seed);
    if (cfg.kind == "hapt") {
        auto tagged = load_tagged_hapt(cfg);
        std::vector<data::Sample> pool;
        pool.reserve(tagged.size());
        for (auto& [user, sample] : tagged) pool.push_back(std::move(sample));
        return pool;
    }

    // mnist
    std::string dir = env_or("EDGELEARN_MNIST_DIR", cfg.dir);
    if (!mnist_present(dir)) {
        if (!cfg.allow_standin)
            throw ConfigError("mnist: no dataset found at '" + dir +
                              "' and stand-in generation is disabled");
        dir = (fs::path(cfg.standin_dir) / "mnist").string();
        if (!mnist_present(dir)) {
            data::SynthDigitsConfig sc;
            sc.per_class = kStandinMnistPerClass;
            sc.seed = cfg.data_seed;
            data::write_synth_mnist(dir, sc);
        }
    }
    auto pool = data::load_mnist_dir(dir);
    if (cfg.hog) {
        hog::HogConfig hc;
        std::vector<data::Sample> out(pool.size());
        parallel_for(pool.size(), default_threads(), [&](std::size_t i) {
            out[i].features = hog::descriptor(pool[i].features, hc);
            out[i].label = pool[i].label;
        });
        return out;
    }
    return pool;
}

// ---------------------------------------------------------------------------
// evaluation helpers

namespace {

std::vector<int> labels_of(const std::vector<data::Sample>& samples) {
    std::vector<int> y(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) y[i] = samples[i].label;
    return y;
}

void push_scores(std::vector<MetricRow>& rows, int run, int location, const std::string& step,
                 const metrics::Scores& s) {
    rows.push_back({run, location, step, "precision", -1, s.precision});
    rows.push_back({run, location, step, "recall", -1, s.recall});
    rows.push_back({run, location, step, "f_measure", -1, s.f_measure});
}

void push_class_acc(std::vector<MetricRow>& rows, int run, const std::string& step,
                    const std::vector<int>& truth, const std::vector<int>& preds, int k) {
    auto acc = metrics::per_class_accuracy(truth, preds, k);
    for (int c = 1; c <= k; ++c)
        if (!std::isnan(acc[c - 1]))
            rows.push_back({run, -1, step, "class_acc", c, acc[c - 1]});
}

// One PPG row per location whose local baseline is not already perfect.
void push_ppg(std::vector<MetricRow>& rows, int run, const std::string& step,
              const std::vector<double>& f_h0, double f_step) {
    for (std::size_t l = 0; l < f_h0.size(); ++l)
        if (metrics::is_ppg_defined(f_h0[l]))
            rows.push_back({run, int(l), step, "ppg", -1, metrics::ppg(f_h0[l], f_step)});
}

json gains_json(const netsim::OverheadLedger& ledger, double raw_size_mb) {
    json g;
    double bytes = double(ledger.total_bytes());
    double feature_bytes =
        double(ledger.N) * double(ledger.dc) * double(ledger.bytes_per_coeff);
    g["overhead_mb"] = bytes / 1e6;
    if (feature_bytes > 0) g["vs_feature_shipping"] = 1.0 - bytes / feature_bytes;
    if (raw_size_mb > 0) g["vs_raw_corpus"] = 1.0 - (bytes / 1e6) / raw_size_mb;
    double d0 = ledger.d0_measured();
    if (d0 > 0 && ledger.N > 0 && ledger.dc > 0 &&
        (ledger.protocol == "gtl" || ledger.protocol == "gtl_limited")) {
        auto b = netsim::gain_lower_bound(ledger.s, ledger.k, d0, double(ledger.N),
                                          double(ledger.dc));
        g["lower_bound"] = {{"exact", b.exact},
                            {"approx_same_d", b.approx_same_d},
                            {"approx_mu", b.approx_mu},
                            {"mu_d", b.mu_d}};
    }
    return g;
}

json overhead_json(netsim::OverheadLedger ledger, std::size_t N, std::size_t dc,
                   double raw_size_mb) {
    ledger.N = N;
    ledger.dc = dc;
    auto recon = netsim::reconcile(ledger);
    json oj = json::parse(netsim::summary_json(ledger, recon));
    oj["gain"] = gains_json(ledger, raw_size_mb);
    return oj;
}

struct RunData {
    std::vector<data::LocalDataset> locals;
    std::vector<data::Sample> test;
};

RunData prepare_run(const ExperimentConfig& cfg, const std::vector<data::Sample>& pool,
                    const std::vector<std::pair<int, data::Sample>>& tagged,
                    std::uint64_t run_seed) {
    RunData rd;
    bool by_user = cfg.dataset.kind == "hapt" && cfg.hapt_by_user;
    if (by_user) {
        // Hold out a global test share, then build one location per user that
        // still covers every class (the rest are spread over them).
        std::vector<std::size_t> idx(tagged.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::mt19937_64 rng(derive_seed(run_seed, kHoldTag));
        std::shuffle(idx.begin(), idx.end(), rng);
        std::size_t n_test = std::size_t(std::llround(cfg.holdout_ratio * double(idx.size())));
        n_test = std::min(n_test, idx.size());
        std::vector<std::pair<int, data::Sample>> train;
        train.reserve(idx.size() - n_test);
        rd.test.reserve(n_test);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            if (i < n_test)
                rd.test.push_back(tagged[idx[i]].second);
            else
                train.push_back(tagged[idx[i]]);
        }
        if (cfg.dataset.subsample_test > 0)
            rd.test = data::subsample(rd.test, cfg.dataset.subsample_test,
                                      derive_seed(run_seed, kSubTeTag));
        rd.locals = data::hapt_redistribute(train, derive_seed(run_seed, kPartTag));
        return rd;
    }

    auto split = data::holdout(pool, cfg.holdout_ratio, derive_seed(run_seed, kHoldTag));
    std::vector<data::Sample> train = std::move(split.train);
    rd.test = std::move(split.test);
    if (cfg.dataset.subsample_train > 0)
        train = data::subsample(train, cfg.dataset.subsample_train,
                                derive_seed(run_seed, kSubTrTag));
    if (cfg.dataset.subsample_test > 0)
        rd.test = data::subsample(rd.test, cfg.dataset.subsample_test,
                                  derive_seed(run_seed, kSubTeTag));
    data::PartitionSpec spec = cfg.partition;
    spec.seed = derive_seed(run_seed, kPartTag);
    rd.locals = data::partition(train, spec);
    return rd;
}

}  // namespace

// ---------------------------------------------------------------------------
// the experiment loop

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    validate(cfg);
    ExperimentReport rep;
    rep.name = cfg.name;

    bool by_user = cfg.dataset.kind == "hapt" && cfg.hapt_by_user;
    std::vector<data::Sample> pool;
    std::vector<std::pair<int, data::Sample>> tagged;
    int k = cfg.protocol.num_classes;
    if (by_user) {
        tagged = load_tagged_hapt(cfg.dataset);
        if (k == 0)
            for (const auto& [user, sample] : tagged) k = std::max(k, sample.label);
    } else {
        pool = load_pool(cfg.dataset);
        if (k == 0) k = data::num_classes(pool);
    }
    if (k < 2) throw ConfigError("experiment needs at least two classes, found " +
                                 std::to_string(k));

    json per_run_overheads = json::array();
    json dyn_json;
    int s_seen = 0;
    std::size_t d_seen = 0, n_seen = 0;

    for (int run = 0; run < cfg.runs; ++run) {
        std::uint64_t run_seed = cfg.seed + std::uint64_t(run);
        RunData rd = prepare_run(cfg, pool, tagged, run_seed);
        const int s = int(rd.locals.size());
        const std::size_t d = rd.locals.empty() ? 0 : rd.locals.front().dim();
        std::size_t n_train = 0;
        for (const auto& loc : rd.locals) n_train += loc.size();
        const std::size_t N = n_train + rd.test.size();
        s_seen = s;
        d_seen = d;
        n_seen = N;

        proto::ProtocolConfig pc = cfg.protocol;
        pc.num_classes = k;
        pc.seed = derive_seed(run_seed, kProtoTag);
        proto::MaliciousConfig mal = cfg.malicious;
        mal.seed = derive_seed(run_seed, kMalTag);
        const std::vector<int> truth = labels_of(rd.test);
        const unsigned threads = pc.threads > 0 ? pc.threads : default_threads();

        auto eval_h0 = [&](const std::vector<proto::Node>& nodes) {
            std::vector<std::vector<int>> preds(nodes.size());
            parallel_for(nodes.size(), threads, [&](std::size_t l) {
                preds[l] = multiclass::predict_all(nodes[l].h0, rd.test);
            });
            return preds;
        };

        switch (pc.procedure) {
            case proto::Procedure::gtl:
            case proto::Procedure::gtl_limited: {
                netsim::Bus bus(s, cfg.meter);
                auto res = pc.procedure == proto::Procedure::gtl
                               ? proto::run_gtl(rd.locals, pc, bus, mal)
                               : proto::run_gtl_limited(rd.locals, pc, bus, mal);

                auto h0_preds = eval_h0(res.nodes);
                std::vector<double> f_h0(s);
                for (int l = 0; l < s; ++l) {
                    auto sc = metrics::score(truth, h0_preds[l], k);
                    f_h0[l] = sc.f_measure;
                    push_scores(rep.rows, run, l, "h0", sc);
                }

                // Clean runs share one source view (every store holds the same
                // honest broadcast); malicious runs need per-aggregator tables.
                const bool shared_view = res.malicious_nodes.empty();
                const int designated = res.aggregator_ids.front();
                multiclass::SourceMarginTable shared_table;
                if (shared_view)
                    shared_table = multiclass::build_source_margin_table(
                        res.nodes[designated].sources_per_class, rd.test, pc.gtl.source_clip);

                std::vector<std::vector<int>> h2_preds(res.aggregator_ids.size());
                parallel_for(res.aggregator_ids.size(), threads, [&](std::size_t i) {
                    int a = res.aggregator_ids[i];
                    if (shared_view) {
                        h2_preds[i] =
                            multiclass::predict_all(res.nodes[a].h2, rd.test, shared_table);
                    } else {
                        auto table = multiclass::build_source_margin_table(
                            res.nodes[a].sources_per_class, rd.test, pc.gtl.source_clip);
                        h2_preds[i] = multiclass::predict_all(res.nodes[a].h2, rd.test, table);
                    }
                });
                for (std::size_t i = 0; i < res.aggregator_ids.size(); ++i) {
                    int a = res.aggregator_ids[i];
                    auto sc = metrics::score(truth, h2_preds[i], k);
                    push_scores(rep.rows, run, a, "gtl_h2", sc);
                    if (metrics::is_ppg_defined(f_h0[a]))
                        rep.rows.push_back(
                            {run, a, "gtl_h2", "ppg", -1, metrics::ppg(f_h0[a], sc.f_measure)});
                }

                // Consensus mean, evaluated through the designated aggregator's
                // source view.
                std::vector<int> mu_preds;
                if (shared_view) {
                    mu_preds = multiclass::predict_all(res.aggregate, rd.test, shared_table);
                } else {
                    auto table = multiclass::build_source_margin_table(
                        res.nodes[designated].sources_per_class, rd.test, pc.gtl.source_clip);
                    mu_preds = multiclass::predict_all(res.aggregate, rd.test, table);
                }
                auto sc_mu = metrics::score(truth, mu_preds, k);
                push_scores(rep.rows, run, -1, "gtl_mu", sc_mu);
                push_class_acc(rep.rows, run, "gtl_mu", truth, mu_preds, k);
                push_ppg(rep.rows, run, "gtl_mu", f_h0, sc_mu.f_measure);

                // Majority vote over the aggregators' refit models.
                std::vector<int> mv_preds(truth.size());
                std::vector<int> votes(res.aggregator_ids.size());
                for (std::size_t p = 0; p < truth.size(); ++p) {
                    for (std::size_t i = 0; i < h2_preds.size(); ++i) votes[i] = h2_preds[i][p];
                    mv_preds[p] = multiclass::majority_vote(votes);
                }
                auto sc_mv = metrics::score(truth, mv_preds, k);
                push_scores(rep.rows, run, -1, "gtl_mv", sc_mv);
                push_class_acc(rep.rows, run, "gtl_mv", truth, mv_preds, k);
                push_ppg(rep.rows, run, "gtl_mv", f_h0, sc_mv.f_measure);

                per_run_overheads.push_back(
                    overhead_json(res.ledger, N, d, cfg.dataset.raw_size_mb));
                break;
            }
            case proto::Procedure::nohtl_mu:
            case proto::Procedure::nohtl_mv: {
                netsim::Bus bus(s, cfg.meter);
                auto res = proto::run_nohtl(rd.locals, pc, bus, mal);

                auto h0_preds = eval_h0(res.nodes);
                std::vector<double> f_h0(s);
                for (int l = 0; l < s; ++l) {
                    auto sc = metrics::score(truth, h0_preds[l], k);
                    f_h0[l] = sc.f_measure;
                    push_scores(rep.rows, run, l, "h0", sc);
                }

                if (pc.procedure == proto::Procedure::nohtl_mu) {
                    auto preds = multiclass::predict_all(res.mean_model, rd.test);
                    auto sc = metrics::score(truth, preds, k);
                    push_scores(rep.rows, run, -1, "nohtl_mu", sc);
                    push_class_acc(rep.rows, run, "nohtl_mu", truth, preds, k);
                    push_ppg(rep.rows, run, "nohtl_mu", f_h0, sc.f_measure);
                } else {
                    // Vote over the exchanged base models as node 0 stores
                    // them (clean runs make every store identical).
                    std::vector<std::vector<int>> sender_preds(static_cast<std::size_t>(s));
                    parallel_for(std::size_t(s), threads, [&](std::size_t m) {
                        multiclass::OvaClassifier clf;
                        clf.models.reserve(std::size_t(k));
                        for (int c = 0; c < k; ++c)
                            clf.models.push_back(res.nodes[0].sources_per_class[c][m]);
                        sender_preds[m] = multiclass::predict_all(clf, rd.test);
                    });
                    std::vector<int> preds(truth.size());
                    std::vector<int> votes(static_cast<std::size_t>(s));
                    for (std::size_t p = 0; p < truth.size(); ++p) {
                        for (std::size_t m = 0; m < std::size_t(s); ++m)
                            votes[m] = sender_preds[m][p];
                        preds[p] = multiclass::majority_vote(votes);
                    }
                    auto sc = metrics::score(truth, preds, k);
                    push_scores(rep.rows, run, -1, "nohtl_mv", sc);
                    push_class_acc(rep.rows, run, "nohtl_mv", truth, preds, k);
                    push_ppg(rep.rows, run, "nohtl_mv", f_h0, sc.f_measure);
                }

                per_run_overheads.push_back(
                    overhead_json(res.ledger, N, d, cfg.dataset.raw_size_mb));
                break;
            }
            case proto::Procedure::dyn_gtl:
            case proto::Procedure::dyn_nohtl: {
                netsim::Bus bus(s + 1, cfg.meter);
                auto res = proto::run_dynamic(rd.locals, pc, cfg.dynamic, bus);

                json phase_arr = json::array();
                for (const auto& ph : res.phases) {
                    auto preds = multiclass::predict_all(ph.aggregate, rd.test);
                    auto sc = metrics::score(truth, preds, k);
                    push_scores(rep.rows, run, -1, "dyn:" + std::to_string(ph.phase), sc);

                    json pj = overhead_json(ph.ledger, ph.batch_samples, d, 0.0);
                    pj["phase"] = ph.phase;
                    pj["batch_locations"] = ph.batch_locations;
                    pj["batch_samples"] = ph.batch_samples;
                    pj["f_measure"] = sc.f_measure;
                    double batch_feature_bytes = double(ph.batch_samples) * double(d) *
                                                 double(cfg.meter.bytes_per_coeff);
                    if (batch_feature_bytes > 0)
                        pj["gain"]["vs_batch_features"] =
                            1.0 - double(ph.ledger.total_bytes()) / batch_feature_bytes;
                    phase_arr.push_back(std::move(pj));
                }
                auto final_preds = multiclass::predict_all(res.final_aggregate, rd.test);
                auto sc = metrics::score(truth, final_preds, k);
                push_scores(rep.rows, run, -1, "dyn_final", sc);
                push_class_acc(rep.rows, run, "dyn_final", truth, final_preds, k);
                dyn_json["runs"].push_back(
                    {{"run", run}, {"phases", std::move(phase_arr)}, {"final_f", sc.f_measure}});
                break;
            }
        }

        if (cfg.cloud_baseline) {
            data::LocalDataset all;
            all.location_id = 0;
            for (const auto& loc : rd.locals)
                all.samples.insert(all.samples.end(), loc.samples.begin(), loc.samples.end());
            auto clf = proto::train_local(all, k, pc.svm, pc.standardize,
                                          derive_seed(run_seed, kCloudTag), nullptr);
            auto preds = multiclass::predict_all(clf, rd.test);
            auto sc = metrics::score(truth, preds, k);
            push_scores(rep.rows, run, -1, "cloud", sc);
            push_class_acc(rep.rows, run, "cloud", truth, preds, k);
        }
    }

    // Step-level aggregates across runs.
    json steps;
    {
        std::vector<std::string> names;
        for (const auto& r : rep.rows)
            if (r.metric == "f_measure" &&
                std::find(names.begin(), names.end(), r.step) == names.end())
                names.push_back(r.step);
        for (const auto& name : names) {
            auto ci = step_f(rep, name);
            json sj = {{"f_mean", ci.mean}, {"f_ci95", ci.half_width}, {"n", ci.n}};
            // PPG aggregate where present (mean over locations, then runs).
            std::map<int, std::pair<double, int>> per_run;
            for (const auto& r : rep.rows)
                if (r.step == name && r.metric == "ppg") {
                    per_run[r.run].first += r.value;
                    per_run[r.run].second += 1;
                }
            if (!per_run.empty()) {
                std::vector<double> vals;
                for (auto& [rn, acc] : per_run) vals.push_back(acc.first / acc.second);
                auto pci = metrics::mean_ci95(vals);
                sj["ppg_mean"] = pci.mean;
                sj["ppg_ci95"] = pci.half_width;
            }
            steps[name] = std::move(sj);
        }
    }

    rep.summary["name"] = cfg.name;
    rep.summary["config"] = config_to_json(cfg);
    rep.summary["k"] = k;
    rep.summary["d"] = d_seen;
    rep.summary["s"] = s_seen;
    rep.summary["N"] = n_seen;
    rep.summary["runs"] = cfg.runs;
    rep.summary["steps"] = std::move(steps);
    if (!per_run_overheads.empty()) rep.summary["overhead"] = std::move(per_run_overheads);
    if (!dyn_json.is_null()) rep.summary["dynamic"] = std::move(dyn_json);
    return rep;
}

// ---------------------------------------------------------------------------
// sweeps

ExperimentReport sweep(const ExperimentConfig& cfg, const std::string& axis,
                       const std::vector<double>& values) {
    if (values.empty()) throw ConfigError("sweep: no axis values given");
    ExperimentReport rep;
    rep.name = cfg.name + "_sweep_" + axis;
    json entries = json::array();
    for (double v : values) {
        ExperimentConfig sub = cfg;
        std::ostringstream tag;
        tag << cfg.name << "_" << axis << "=" << v;
        sub.name = tag.str();
        if (axis == "num_aggregators") {
            sub.protocol.procedure = proto::Procedure::gtl_limited;
            sub.protocol.num_aggregators = int(std::llround(v));
        } else if (axis == "malicious_f") {
            if (sub.malicious.mode == proto::MaliciousConfig::Mode::none)
                sub.malicious.mode = proto::MaliciousConfig::Mode::malicious1;
            sub.malicious.node_fraction = v;
        } else if (axis == "malicious_p") {
            if (sub.malicious.mode == proto::MaliciousConfig::Mode::none)
                sub.malicious.mode = proto::MaliciousConfig::Mode::malicious2;
            sub.malicious.param_probability = v;
        } else if (axis == "s") {
            sub.partition.num_locations = int(std::llround(v));
            if (sub.protocol.collector_id >= sub.partition.num_locations)
                sub.protocol.collector_id = 0;
        } else if (axis == "alpha") {
            sub.dynamic.alpha = v;
        } else {
            throw ConfigError("unknown sweep axis '" + axis + "'");
        }
        auto sub_rep = run_experiment(sub);
        entries.push_back({{"value", v}, {"summary", std::move(sub_rep.summary)}});
    }
    rep.summary["name"] = rep.name;
    rep.summary["sweep_axis"] = axis;
    rep.summary["values"] = values;
    rep.summary["entries"] = std::move(entries);
    return rep;
}

// ---------------------------------------------------------------------------
// reporting

metrics::MeanCI step_f(const ExperimentReport& report, const std::string& step) {
    std::map<int, std::pair<double, int>> per_run;
    for (const auto& r : report.rows)
        if (r.step == step && r.metric == "f_measure") {
            per_run[r.run].first += r.value;
            per_run[r.run].second += 1;
        }
    if (per_run.empty()) throw MetricError("step_f: no f_measure rows for step '" + step + "'");
    std::vector<double> vals;
    vals.reserve(per_run.size());
    for (auto& [run, acc] : per_run) vals.push_back(acc.first / acc.second);
    return metrics::mean_ci95(vals);
}

namespace {

std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(prec) << v;
    return os.str();
}

void render_overhead_block(std::ostringstream& os, const json& oj) {
    os << "  phase            coeffs     predicted    residual   messages\n";
    const json& rec = oj.at("reconciliation");
    for (const auto& line : rec.at("lines")) {
        std::string name = line.at("phase").get<std::string>();
        os << "  " << std::left << std::setw(16) << name << std::right << std::setw(9)
           << line.at("metered").get<double>() << std::setw(14)
           << fmt(line.at("predicted").get<double>(), 1) << std::setw(12)
           << fmt(line.at("residual").get<double>(), 3) << std::setw(8)
           << line.at("actual_messages").get<std::size_t>() << "\n";
    }
    os << "  measured d0: " << fmt(oj.at("d0_measured").get<double>(), 2);
    if (oj.at("d1_measured").get<double>() > 0)
        os << "   d1: " << fmt(oj.at("d1_measured").get<double>(), 2);
    os << "\n";
    double bpc = double(oj.value("bytes_per_coeff", std::size_t(8)));
    os << "  total: " << fmt(oj.at("total_bytes").get<double>() / 1e6, 3) << " MB";
    if (rec.at("bound_applicable").get<bool>())
        os << "   bound: " << fmt(rec.at("bound").get<double>() * bpc / 1e6, 3) << " MB ("
           << (rec.at("within_bound").get<bool>() ? "within" : "EXCEEDED") << ")";
    os << "\n";
    if (oj.contains("gain")) {
        const json& g = oj.at("gain");
        os << "  gain:";
        if (g.contains("vs_feature_shipping"))
            os << " vs features " << fmt(100.0 * g.at("vs_feature_shipping").get<double>(), 2)
               << "%";
        if (g.contains("vs_raw_corpus"))
            os << ", vs raw corpus " << fmt(100.0 * g.at("vs_raw_corpus").get<double>(), 2)
               << "%";
        os << "\n";
    }
}

void render_one(std::ostringstream& os, const json& summary) {
    os << "== " << summary.value("name", std::string("experiment")) << " ==\n";
    os << "k=" << summary.value("k", 0) << "  d=" << summary.value("d", 0)
       << "  s=" << summary.value("s", 0) << "  N=" << summary.value("N", 0)
       << "  runs=" << summary.value("runs", 0) << "\n\n";

    if (summary.contains("steps")) {
        os << "  step          F(mean)   +-95%     PPG(mean)\n";
        const json& steps = summary.at("steps");
        std::vector<std::string> order = {"h0",       "gtl_h2",   "gtl_mu", "gtl_mv",
                                          "nohtl_mu", "nohtl_mv", "cloud",  "dyn_final"};
        std::vector<std::string> names;
        for (const auto& n : order)
            if (steps.contains(n)) names.push_back(n);
        for (auto it = steps.begin(); it != steps.end(); ++it)
            if (std::find(names.begin(), names.end(), it.key()) == names.end())
                names.push_back(it.key());
        for (const auto& n : names) {
            const json& sj = steps.at(n);
            os << "  " << std::left << std::setw(14) << n << std::right
               << fmt(sj.at("f_mean").get<double>()) << "   " << fmt(sj.at("f_ci95").get<double>())
               << "   "
               << (sj.contains("ppg_mean") ? fmt(sj.at("ppg_mean").get<double>()) : std::string("-"))
               << "\n";
        }
        os << "\n";
    }

    if (summary.contains("overhead") && !summary.at("overhead").empty()) {
        os << "network overhead (run 0, coefficient counts):\n";
        render_overhead_block(os, summary.at("overhead").at(0));
        os << "\n";
    }

    if (summary.contains("dynamic")) {
        os << "dynamic phases (run 0):\n";
        const json& runs = summary.at("dynamic").at("runs");
        if (!runs.empty()) {
            os << "  phase   F         overhead(coeffs)   gain vs batch upload\n";
            for (const auto& ph : runs.at(0).at("phases")) {
                os << "  " << std::left << std::setw(7) << ph.at("phase").get<int>() << std::right
                   << fmt(ph.at("f_measure").get<double>()) << "   " << std::setw(16)
                   << ph.at("total_coefficients").get<double>() << "   ";
                if (ph.at("gain").contains("vs_batch_features"))
                    os << fmt(100.0 * ph.at("gain").at("vs_batch_features").get<double>(), 2)
                       << "%";
                os << "\n";
            }
        }
        os << "\n";
    }
}

}  // namespace

std::string render_tables(const json& summary) {
    std::ostringstream os;
    if (summary.contains("sweep_axis")) {
        os << "== " << summary.value("name", std::string("sweep")) << " ==\n";
        os << "axis: " << summary.at("sweep_axis").get<std::string>() << "\n\n";
        for (const auto& e : summary.at("entries")) {
            os << "-- value " << e.at("value").get<double>() << " --\n";
            render_one(os, e.at("summary"));
        }
        return os.str();
    }
    render_one(os, summary);
    return os.str();
}

void write_report(const ExperimentReport& report, const std::string& out_dir) {
    fs::create_directories(out_dir);

    if (!report.rows.empty()) {
        std::ofstream csv(fs::path(out_dir) / "metrics.csv");
        if (!csv) throw Error("cannot write metrics.csv under " + out_dir);
        csv << "run,location,step,metric,class,value\n";
        char buf[64];
        for (const auto& r : report.rows) {
            std::snprintf(buf, sizeof buf, "%.17g", r.value);
            csv << r.run << ',' << r.location << ',' << r.step << ',' << r.metric << ','
                << r.class_label << ',' << buf << '\n';
        }
    }

    {
        std::ofstream js(fs::path(out_dir) / "summary.json");
        if (!js) throw Error("cannot write summary.json under " + out_dir);
        js << report.summary.dump(2) << '\n';
    }

    if (report.summary.contains("sweep_axis")) {
        std::ofstream sw(fs::path(out_dir) / "sweep.csv");
        if (!sw) throw Error("cannot write sweep.csv under " + out_dir);
        sw << "axis,value,step,f_mean,f_ci95,ppg_mean\n";
        const std::string axis = report.summary.at("sweep_axis").get<std::string>();
        for (const auto& e : report.summary.at("entries")) {
            const json& steps = e.at("summary").at("steps");
            for (auto it = steps.begin(); it != steps.end(); ++it) {
                sw << axis << ',' << e.at("value").get<double>() << ',' << it.key() << ','
                   << it.value().at("f_mean").get<double>() << ','
                   << it.value().at("f_ci95").get<double>() << ',';
                if (it.value().contains("ppg_mean"))
                    sw << it.value().at("ppg_mean").get<double>();
                sw << '\n';
            }
        }
    }

    std::ofstream tb(fs::path(out_dir) / "tables.txt");
    if (!tb) throw Error("cannot write tables.txt under " + out_dir);
    tb << render_tables(report.summary);
}

}  // namespace edgelearn::exp
