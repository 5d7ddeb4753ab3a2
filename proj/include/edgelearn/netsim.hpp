#pragma once

#include <cstdint>
#include <mutex>
#include <string>
#include <vector>

#include "edgelearn/model.hpp"

namespace edgelearn::netsim {

enum class Phase { step1, step3, collector_up, collector_down, dyn_g };
constexpr int kNumPhases = 5;
std::string to_string(Phase p);

// Everything the protocols send is a model; raw_data exists only so the
// zero-data-egress audit can be shown to catch violations.
enum class PayloadKind { model, raw_data };

struct ModelMessage {
    int src = -1;
    int dst = -1;
    Phase phase = Phase::step1;
    PayloadKind kind = PayloadKind::model;
    LinearModel payload;
    std::size_t non_null_count = 0;
    std::size_t byte_size = 0;
    std::size_t sequence = 0;  // global send order
};

struct PhaseTotals {
    std::size_t messages = 0;
    std::size_t coefficients = 0;  // sum of non-null counts
    std::size_t bytes = 0;
};

struct MeterConfig {
    double eps_zero = 1e-12;          // |coef| <= eps_zero counts as null
    std::size_t bytes_per_coeff = 8;  // double precision
    bool indexed_sparse = false;      // sparse payloads additionally pay 4 B per index
    bool record_rows = false;         // retain one row per message for CSV export
};

// Aggregated meter snapshot plus the run-shape parameters the analytical
// formulas consume. d0/d1 are measured from actual payloads, never assumed.
struct OverheadLedger {
    std::string protocol;  // gtl | gtl_limited | nohtl_mu | nohtl_mv | dyn_gtl | dyn_nohtl
    int s = 0;             // locations
    int k = 0;             // classes
    int num_aggregators = 0;  // gtl_limited (0 means s)
    int batch = 0;            // dynamic phase batch size
    std::size_t N = 0;        // total dataset cardinality (gain baselines)
    std::size_t dc = 0;       // per-sample feature count for the cloud baseline
    std::size_t bytes_per_coeff = 8;
    std::size_t non_model_payloads = 0;  // zero-data-egress audit counter
    PhaseTotals phases[kNumPhases];

    const PhaseTotals& at(Phase p) const { return phases[int(p)]; }
    std::size_t total_coefficients() const;
    std::size_t total_bytes() const;
    std::size_t total_messages() const;
    // Mean non-null counts: d0 over base-model phases (step1 or collector
    // traffic), d1 over step3 payloads. 0 when the phase is empty.
    double d0_measured() const;
    double d1_measured() const;
};

// In-memory message bus with per-destination mailboxes, in-order delivery and
// atomic metering. The bus models volume only: no latency, loss or bandwidth.
class Bus {
  public:
    explicit Bus(int num_nodes, MeterConfig cfg = {});

    // Deliver one model from src to dst; self-sends and unknown endpoints are
    // routing errors. Returns the metered message (the delivery receipt).
    ModelMessage send(int src, int dst, Phase phase, const LinearModel& model);

    // Deliberately ships a non-model payload; exists so tests can prove the
    // egress audit trips. Protocols never call this.
    void send_raw_data(int src, int dst, Phase phase, std::size_t nbytes);

    // Drains dst's mailbox in send order.
    std::vector<ModelMessage> drain(int dst);

    const MeterConfig& config() const { return cfg_; }
    int num_nodes() const { return num_nodes_; }
    PhaseTotals totals(Phase p) const;
    std::size_t total_coefficients() const;
    std::size_t total_bytes() const;
    std::size_t total_messages() const;
    std::size_t non_model_payloads() const;  // zero-data-egress audit counter

    // Snapshot of the meter; the caller fills in protocol/shape fields.
    OverheadLedger ledger() const;
    std::vector<ModelMessage> rows() const;  // populated when record_rows

  private:
    void meter(ModelMessage& msg);

    mutable std::mutex mutex_;
    int num_nodes_;
    MeterConfig cfg_;
    std::vector<std::vector<ModelMessage>> mailbox_;
    PhaseTotals totals_[kNumPhases];
    std::vector<ModelMessage> rows_;
    std::size_t sequence_ = 0;
    std::size_t non_model_payloads_ = 0;
};

// --- analytical formulas ---------------------------------------------------

struct GtlOverheadPrediction {
    double oh0 = 0.0;    // s(s-1) d0 k
    double oh1 = 0.0;    // s(s-1) d1 k
    double total = 0.0;  // oh0 + oh1
};
GtlOverheadPrediction predict_overhead_gtl(int s, int k, double d0, double d1);

struct NohtlOverheadPrediction {
    double mu = 0.0;  // 2 k (s-1) d0
    double mv = 0.0;  // k s (s-1) d0
};
NohtlOverheadPrediction predict_overhead_nohtl(int s, int k, double d0);

// Upper bound 2 k s^2 d0 on the GTL total whenever d1 <= d0.
double overhead_bound(int s, int k, double d0);

// Gain lower bound of GTL over shipping the data, with its two published
// approximations. mu_d = N/s is the mean location cardinality.
struct GainBound {
    double exact = 0.0;          // 1 - 2 k s^2 d0 / (N dc)
    double approx_same_d = 0.0;  // 1 - 2 k s^2 / N     (d0 ~ dc)
    double approx_mu = 0.0;      // 1 - 2 k s / mu_d
    double mu_d = 0.0;
};
GainBound gain_lower_bound(int s, int k, double d0, double N, double dc);

// Traffic between the permanent device G and one batch of `batch` arrivals:
// G distributes the aggregate (batch * k * d0) and receives the batch's new
// aggregate back (k * d0), i.e. (batch + 1) k d0 coefficients.
double overhead_dyn_g(int batch, int k, double d0);

// --- reconciliation ----------------------------------------------------------

struct ReconLine {
    std::string phase;
    double metered = 0.0;    // coefficient count
    double predicted = 0.0;  // formula value at measured d0/d1
    double residual = 0.0;   // metered - predicted
    std::size_t expected_messages = 0;
    std::size_t actual_messages = 0;
};

struct Reconciliation {
    std::vector<ReconLine> lines;
    double metered_total = 0.0;
    double predicted_total = 0.0;
    double bound = 0.0;        // 2 k s^2 d0, when the protocol is a GTL variant
    bool bound_applicable = false;  // requires d1 <= d0
    bool within_bound = true;
};

Reconciliation reconcile(const OverheadLedger& ledger);

// CSV rows "phase,src,dst,count,bytes" (requires record_rows) and a JSON
// summary block with totals, measured d0/d1, formulas and reconciliation.
std::string rows_csv(const std::vector<ModelMessage>& rows);
std::string summary_json(const OverheadLedger& ledger, const Reconciliation& recon);

}  // namespace edgelearn::netsim
