#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "edgelearn/data.hpp"
#include "edgelearn/greedytl.hpp"
#include "edgelearn/multiclass.hpp"
#include "edgelearn/netsim.hpp"
#include "edgelearn/svm.hpp"

namespace edgelearn::proto {

enum class Procedure { gtl, nohtl_mu, nohtl_mv, gtl_limited, dyn_gtl, dyn_nohtl };
Procedure procedure_from_string(const std::string& s);
std::string to_string(Procedure p);

struct ProtocolConfig {
    Procedure procedure = Procedure::gtl;
    int num_aggregators = 0;  // gtl_limited; 0 means every node aggregates
    bool random_aggregators = false;
    int collector_id = 0;  // nohtl_mu star center
    learn::SvmConfig svm;
    learn::GreedyTLConfig gtl;
    bool standardize = true;
    int num_classes = 0;  // 0 = inferred from the data
    unsigned threads = 0;  // 0 = hardware concurrency
    std::uint64_t seed = 0;
};

struct MaliciousConfig {
    enum class Mode { none, malicious1, malicious2 };
    Mode mode = Mode::none;
    double node_fraction = 0.0;      // malicious1: fraction of nodes sending noise
    double param_probability = 0.0;  // malicious2: per-coefficient replacement probability
    bool corrupt_step3 = false;      // exploration knob; the baseline corrupts step 1 only
    std::uint64_t seed = 0;
};

// Per-location protocol state. Slots fill strictly in step order; local
// samples never leave this struct except as fitted model coefficients.
struct Node {
    int location_id = -1;
    data::Scaler scaler;
    multiclass::OvaClassifier h0;  // step 0: local one-vs-all SVM, raw space
    // Step-1 store: per class, one model per location in ascending-id order
    // (the own slot holds the honest local model).
    std::vector<learn::SourceSet> sources_per_class;
    multiclass::OvaClassifier h2;  // step 2: GreedyTL refit (aggregators only)
    multiclass::OvaClassifier h4;  // step 4: consensus mean over h2 models
    bool is_aggregator = false;
};

struct GtlRunResult {
    std::vector<Node> nodes;
    multiclass::OvaClassifier aggregate;  // the final mean model (augmented space)
    std::vector<int> aggregator_ids;
    std::vector<int> malicious_nodes;  // sorted; empty on clean runs
    netsim::OverheadLedger ledger;
};

struct NohtlRunResult {
    std::vector<Node> nodes;  // h0 per node; sources_per_class filled for mv
    multiclass::OvaClassifier mean_model;  // nohtl_mu consensus
    std::vector<int> malicious_nodes;
    netsim::OverheadLedger ledger;
};

// Step 0 for one location: per-location z-scoring, one-vs-all SVM, fold-back
// to raw coordinates. Exposed because every procedure starts this way.
multiclass::OvaClassifier train_local(const data::LocalDataset& local, int k,
                                      const learn::SvmConfig& svm, bool standardize,
                                      std::uint64_t seed, data::Scaler* out_scaler);

// Model corruption: malicious1 replaces every coefficient with a fresh N(0,1)
// draw; malicious2 replaces each coefficient independently with probability p.
LinearModel corrupt(const LinearModel& model, const MaliciousConfig& cfg, std::mt19937_64& rng);

// GTL (all-to-all) and its aggregator-limited variant. run_gtl is exactly
// run_gtl_limited with every node aggregating, so the two share one learning
// trajectory given the same seeds.
GtlRunResult run_gtl(const std::vector<data::LocalDataset>& locals, const ProtocolConfig& cfg,
                     netsim::Bus& bus, const MaliciousConfig& malice = {});
GtlRunResult run_gtl_limited(const std::vector<data::LocalDataset>& locals,
                             const ProtocolConfig& cfg, netsim::Bus& bus,
                             const MaliciousConfig& malice = {});

// noHTL: consensus mean at a collector (mu) or all-to-all exchange with
// majority voting at prediction time (mv); cfg.procedure picks the variant.
NohtlRunResult run_nohtl(const std::vector<data::LocalDataset>& locals, const ProtocolConfig& cfg,
                         netsim::Bus& bus, const MaliciousConfig& malice = {});

// --- dynamic continuous learning -------------------------------------------

struct DynamicConfig {
    int batch_size = 4;   // devices arriving per phase
    double alpha = 0.5;   // EMA weight on the stored aggregate
};

struct DynamicPhaseResult {
    int phase = 0;
    std::vector<int> batch_locations;
    multiclass::OvaClassifier aggregate;  // m after the EMA merge
    netsim::OverheadLedger ledger;        // this phase's traffic only
    std::size_t batch_samples = 0;        // for per-phase cloud-upload comparisons
};

struct DynamicRunResult {
    std::vector<DynamicPhaseResult> phases;
    multiclass::OvaClassifier final_aggregate;
};

// Arrival stream: `stream` locations join in order, batch_size per phase. The
// permanent device G (bus id = stream.size()) stores the aggregate m and
// merges each phase's result as m <- alpha*m + (1-alpha)*m'. With dyn_gtl the
// current m joins every newcomer's source set and the batch aggregate is
// flattened to raw coordinates before storage; with dyn_nohtl G plays the
// collector role. The bus must be sized stream.size()+1.
DynamicRunResult run_dynamic(const std::vector<data::LocalDataset>& stream,
                             const ProtocolConfig& cfg, const DynamicConfig& dyn,
                             netsim::Bus& bus);

}  // namespace edgelearn::proto
