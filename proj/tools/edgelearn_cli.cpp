// edgelearn: communication-efficient distributed learning simulator.
//
// Subcommands:
//   presets     list built-in experiment presets
//   validate    parse and check a config file
//   run         run one experiment (config file or preset) and write a report
//   sweep       repeat an experiment along one axis
//   report      re-render tables from an existing summary.json
//   fetch-data  prepare datasets: prints download instructions for the real
//               corpora and generates offline stand-in data
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "edgelearn/common.hpp"
#include "edgelearn/experiment.hpp"
#include "edgelearn/kernels.hpp"

namespace el = edgelearn;
using el::exp::ExperimentConfig;

namespace {

// ---------------------------------------------------------------------------
// presets

struct Preset {
    std::string description;
    std::function<ExperimentConfig()> make;
};

ExperimentConfig base_mnist() {
    ExperimentConfig cfg;
    cfg.dataset.kind = "mnist";
    cfg.dataset.hog = true;
    cfg.dataset.subsample_train = 3000;
    cfg.dataset.subsample_test = 900;
    cfg.dataset.raw_size_mb = 358.0;
    cfg.partition.num_locations = 10;
    cfg.holdout_ratio = 0.3;
    cfg.runs = 5;
    cfg.protocol.procedure = el::proto::Procedure::gtl;
    cfg.protocol.gtl.kappa = 50;
    cfg.protocol.gtl.bag_sample_size = 50;
    return cfg;
}

ExperimentConfig base_hapt() {
    ExperimentConfig cfg;
    cfg.dataset.kind = "hapt";
    cfg.dataset.raw_size_mb = 103.0;
    cfg.hapt_by_user = true;
    cfg.holdout_ratio = 0.3;
    cfg.runs = 3;
    cfg.protocol.procedure = el::proto::Procedure::gtl;
    cfg.protocol.gtl.kappa = 50;
    cfg.protocol.gtl.bag_sample_size = 50;
    return cfg;
}

const std::map<std::string, Preset>& presets() {
    static const std::map<std::string, Preset> table = [] {
        std::map<std::string, Preset> t;

        t["blobs_smoke"] = {"tiny synthetic-blob run for a quick end-to-end check", [] {
                                ExperimentConfig cfg;
                                cfg.name = "blobs_smoke";
                                cfg.dataset.kind = "synth_blobs";
                                cfg.dataset.blob_classes = 4;
                                cfg.dataset.blob_dim = 12;
                                cfg.dataset.blob_per_class = 150;
                                cfg.partition.num_locations = 4;
                                cfg.runs = 2;
                                cfg.protocol.gtl.kappa = 12;
                                cfg.protocol.gtl.bag_sample_size = 40;
                                return cfg;
                            }};

        t["mnist_gtl"] = {"desk-scale digits, balanced split over 10 locations", [] {
                              ExperimentConfig cfg = base_mnist();
                              cfg.name = "mnist_gtl";
                              return cfg;
                          }};
        t["mnist_gtl_classunb"] = {"digits with five underrepresented classes (10% kept)", [] {
                                       ExperimentConfig cfg = base_mnist();
                                       cfg.name = "mnist_gtl_classunb";
                                       cfg.partition.regime = el::data::Regime::class_unbalance;
                                       cfg.partition.underrepresented_classes = {3, 6, 7, 8, 9};
                                       cfg.partition.depletion_keep = 0.1;
                                       return cfg;
                                   }};
        t["mnist_gtl_nodeunb"] = {"digits with one dominant class (70%) per location", [] {
                                      ExperimentConfig cfg = base_mnist();
                                      cfg.name = "mnist_gtl_nodeunb";
                                      cfg.partition.regime = el::data::Regime::node_unbalance;
                                      cfg.partition.dominant_fraction = 0.7;
                                      return cfg;
                                  }};
        t["mnist_nohtl_mu"] = {"digits, consensus mean of local models at a collector", [] {
                                   ExperimentConfig cfg = base_mnist();
                                   cfg.name = "mnist_nohtl_mu";
                                   cfg.protocol.procedure = el::proto::Procedure::nohtl_mu;
                                   return cfg;
                               }};
        t["mnist_nohtl_mv"] = {"digits, all-to-all exchange with majority voting", [] {
                                   ExperimentConfig cfg = base_mnist();
                                   cfg.name = "mnist_nohtl_mv";
                                   cfg.protocol.procedure = el::proto::Procedure::nohtl_mv;
                                   return cfg;
                               }};
        t["mnist_gtl_limited"] = {"digits with only 3 of 10 locations aggregating", [] {
                                      ExperimentConfig cfg = base_mnist();
                                      cfg.name = "mnist_gtl_limited";
                                      cfg.protocol.procedure = el::proto::Procedure::gtl_limited;
                                      cfg.protocol.num_aggregators = 3;
                                      return cfg;
                                  }};
        t["mnist_gtl_malicious1"] = {"digits with 30% of nodes broadcasting noise models", [] {
                                         ExperimentConfig cfg = base_mnist();
                                         cfg.name = "mnist_gtl_malicious1";
                                         cfg.malicious.mode =
                                             el::proto::MaliciousConfig::Mode::malicious1;
                                         cfg.malicious.node_fraction = 0.3;
                                         return cfg;
                                     }};
        t["mnist_gtl_malicious2"] = {"digits with every node flipping 30% of coefficients", [] {
                                         ExperimentConfig cfg = base_mnist();
                                         cfg.name = "mnist_gtl_malicious2";
                                         cfg.malicious.mode =
                                             el::proto::MaliciousConfig::Mode::malicious2;
                                         cfg.malicious.param_probability = 0.3;
                                         return cfg;
                                     }};

        t["hapt_gtl"] = {"activity recognition, one location per complete user", [] {
                             ExperimentConfig cfg = base_hapt();
                             cfg.name = "hapt_gtl";
                             return cfg;
                         }};
        t["hapt_nohtl_mu"] = {"activity recognition, collector mean baseline", [] {
                                  ExperimentConfig cfg = base_hapt();
                                  cfg.name = "hapt_nohtl_mu";
                                  cfg.protocol.procedure = el::proto::Procedure::nohtl_mu;
                                  return cfg;
                              }};
        t["hapt_dyn_gtl"] = {"activity recognition, devices arriving 4 per phase (transfer)",
                             [] {
                                 ExperimentConfig cfg = base_hapt();
                                 cfg.name = "hapt_dyn_gtl";
                                 cfg.protocol.procedure = el::proto::Procedure::dyn_gtl;
                                 // Unclipped source predictions keep the
                                 // raw-space flattening of the batch
                                 // aggregate exact.
                                 cfg.protocol.gtl.source_clip = 0.0;
                                 cfg.dynamic.batch_size = 4;
                                 cfg.dynamic.alpha = 0.5;
                                 cfg.runs = 2;
                                 return cfg;
                             }};
        t["hapt_dyn_nohtl"] = {"activity recognition, devices arriving 4 per phase (mean)",
                               [] {
                                   ExperimentConfig cfg = base_hapt();
                                   cfg.name = "hapt_dyn_nohtl";
                                   cfg.protocol.procedure = el::proto::Procedure::dyn_nohtl;
                                   cfg.dynamic.batch_size = 4;
                                   cfg.dynamic.alpha = 0.5;
                                   cfg.runs = 2;
                                   return cfg;
                               }};

        // Full corpus shapes. With the real datasets mounted these reproduce
        // the published operating points; with stand-in data they still run
        // (slowly) and exercise identical code paths.
        t["mnist_full_gtl"] = {"full-corpus digits shape: 30 locations, single-bag transfer",
                               [] {
                                   ExperimentConfig cfg = base_mnist();
                                   cfg.name = "mnist_full_gtl";
                                   cfg.dataset.subsample_train = 0;
                                   cfg.dataset.subsample_test = 0;
                                   cfg.partition.num_locations = 30;
                                   cfg.runs = 1;
                                   cfg.protocol.gtl.bag_count = 1;
                                   return cfg;
                               }};
        t["hapt_full_gtl"] = {"full-corpus activity shape: per-user locations, single bag",
                              [] {
                                  ExperimentConfig cfg = base_hapt();
                                  cfg.name = "hapt_full_gtl";
                                  cfg.runs = 1;
                                  cfg.protocol.gtl.bag_count = 1;
                                  return cfg;
                              }};
        return t;
    }();
    return table;
}

ExperimentConfig resolve_config(const std::string& config_path, const std::string& preset) {
    if (!config_path.empty() && !preset.empty())
        throw el::ConfigError("give either --config or --preset, not both");
    if (!config_path.empty()) return el::exp::load_config(config_path);
    if (!preset.empty()) {
        auto it = presets().find(preset);
        if (it == presets().end()) {
            std::ostringstream os;
            os << "unknown preset '" << preset << "'; available:";
            for (const auto& [name, p] : presets()) os << " " << name;
            throw el::ConfigError(os.str());
        }
        return it->second.make();
    }
    throw el::ConfigError("one of --config or --preset is required");
}

void apply_overrides(ExperimentConfig& cfg, int runs, std::int64_t seed, unsigned threads,
                     const std::string& out) {
    if (runs > 0) cfg.runs = runs;
    if (seed >= 0) cfg.seed = std::uint64_t(seed);
    if (threads > 0) cfg.protocol.threads = threads;
    if (!out.empty()) cfg.output_dir = out;
    el::exp::validate(cfg);
}

int cmd_presets(const std::string& dump) {
    if (!dump.empty()) {
        auto it = presets().find(dump);
        if (it == presets().end()) throw el::ConfigError("unknown preset '" + dump + "'");
        std::cout << el::exp::config_to_json(it->second.make()).dump(2) << "\n";
        return 0;
    }
    for (const auto& [name, p] : presets())
        std::cout << "  " << name << std::string(name.size() < 22 ? 22 - name.size() : 1, ' ')
                  << p.description << "\n";
    return 0;
}

int cmd_fetch_data(const std::string& standin_dir, bool skip_standin) {
    std::cout << "This tool never downloads anything. To use the real corpora:\n"
              << "  digits: obtain the four IDX files (train/t10k images and labels)\n"
              << "          and point EDGELEARN_MNIST_DIR (or dataset.dir) at them.\n"
              << "  activity: obtain the smartphone activity recordings in the UCI text\n"
              << "          layout (X.txt, y.txt, subject_id.txt, or the Train/Test split)\n"
              << "          and point EDGELEARN_HAPT_DIR (or dataset.dir) at them.\n";
    if (skip_standin) return 0;
    std::cout << "Generating stand-in data under '" << standin_dir << "' ...\n";
    el::exp::DatasetConfig d;
    d.standin_dir = standin_dir;
    d.dir = "";  // force the stand-in path regardless of the working directory
    d.kind = "mnist";
    d.hog = false;
    auto m = el::exp::load_pool(d);
    std::cout << "  digits stand-in ready: " << m.size() << " images\n";
    d.kind = "hapt";
    auto h = el::exp::load_tagged_hapt(d);
    std::cout << "  activity stand-in ready: " << h.size() << " samples\n";
    std::cout << "Real data, when present, always takes precedence over stand-ins.\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"communication-efficient distributed learning simulator"};
    app.require_subcommand(1);

    auto* sc_presets = app.add_subcommand("presets", "list built-in experiment presets");
    std::string dump_preset;
    sc_presets->add_option("--dump", dump_preset, "print one preset as a JSON config");

    std::string config_path, preset_name, out_dir, axis, summary_path, standin_dir = "standin_data";
    std::vector<double> axis_values;
    int runs = 0;
    std::int64_t seed = -1;
    unsigned threads = 0;
    bool quiet = false, skip_standin = false;

    auto* sc_validate = app.add_subcommand("validate", "parse and check a config file");
    sc_validate->add_option("--config", config_path, "JSON experiment config")->required();

    auto* sc_run = app.add_subcommand("run", "run one experiment and write a report");
    sc_run->add_option("--config", config_path, "JSON experiment config");
    sc_run->add_option("--preset", preset_name, "built-in preset name (see `presets`)");
    sc_run->add_option("--runs", runs, "override the number of repetitions");
    sc_run->add_option("--seed", seed, "override the base seed");
    sc_run->add_option("--threads", threads, "worker threads (0 = hardware)");
    sc_run->add_option("--out", out_dir, "report directory (overrides config)");
    sc_run->add_flag("--quiet", quiet, "suppress the table printout");

    auto* sc_sweep = app.add_subcommand("sweep", "repeat an experiment along one axis");
    sc_sweep->add_option("--config", config_path, "JSON experiment config");
    sc_sweep->add_option("--preset", preset_name, "built-in preset name");
    sc_sweep
        ->add_option("--axis", axis,
                     "num_aggregators | malicious_f | malicious_p | s | alpha")
        ->required();
    sc_sweep->add_option("--values", axis_values, "axis values")->required()->delimiter(',');
    sc_sweep->add_option("--runs", runs, "override the number of repetitions");
    sc_sweep->add_option("--seed", seed, "override the base seed");
    sc_sweep->add_option("--threads", threads, "worker threads (0 = hardware)");
    sc_sweep->add_option("--out", out_dir, "report directory (overrides config)");
    sc_sweep->add_flag("--quiet", quiet, "suppress the table printout");

    auto* sc_report = app.add_subcommand("report", "re-render tables from a summary.json");
    sc_report->add_option("--summary", summary_path, "path to summary.json")->required();

    auto* sc_fetch = app.add_subcommand("fetch-data", "dataset instructions + stand-in generation");
    sc_fetch->add_option("--standin-dir", standin_dir, "where stand-in data is generated");
    sc_fetch->add_flag("--no-standin", skip_standin, "print instructions only");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sc_presets->parsed()) return cmd_presets(dump_preset);

        if (sc_validate->parsed()) {
            el::exp::load_config(config_path);
            std::cout << "config ok: " << config_path << "\n";
            return 0;
        }

        if (sc_fetch->parsed()) return cmd_fetch_data(standin_dir, skip_standin);

        if (sc_report->parsed()) {
            std::ifstream in(summary_path);
            if (!in) throw el::ConfigError("cannot open summary file: " + summary_path);
            nlohmann::json j;
            in >> j;
            std::cout << el::exp::render_tables(j);
            return 0;
        }

        if (sc_run->parsed() || sc_sweep->parsed()) {
            ExperimentConfig cfg = resolve_config(config_path, preset_name);
            apply_overrides(cfg, runs, seed, threads, out_dir);
            std::cerr << "kernel backend: " << el::kernels::backend_name() << "\n";
            el::exp::ExperimentReport rep = sc_run->parsed()
                                                ? el::exp::run_experiment(cfg)
                                                : el::exp::sweep(cfg, axis, axis_values);
            el::exp::write_report(rep, cfg.output_dir);
            if (!quiet) std::cout << el::exp::render_tables(rep.summary);
            std::cerr << "report written to " << cfg.output_dir << "\n";
            return 0;
        }
    } catch (const el::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
