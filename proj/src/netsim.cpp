#include "edgelearn/netsim.hpp"

#include <cmath>
#include <sstream>

#include "edgelearn/common.hpp"

#include "json.hpp"

namespace edgelearn::netsim {

std::string to_string(Phase p) {
    switch (p) {
        case Phase::step1: return "step1";
        case Phase::step3: return "step3";
        case Phase::collector_up: return "collector_up";
        case Phase::collector_down: return "collector_down";
        default: return "dyn_g";
    }
}

std::size_t OverheadLedger::total_coefficients() const {
    std::size_t t = 0;
    for (const auto& ph : phases) t += ph.coefficients;
    return t;
}

std::size_t OverheadLedger::total_bytes() const {
    std::size_t t = 0;
    for (const auto& ph : phases) t += ph.bytes;
    return t;
}

std::size_t OverheadLedger::total_messages() const {
    std::size_t t = 0;
    for (const auto& ph : phases) t += ph.messages;
    return t;
}

double OverheadLedger::d0_measured() const {
    // Base models travel in step1 (GTL, noHTL-mv) or in the collector phases
    // (noHTL-mu uploads, dynamic G traffic).
    for (Phase p : {Phase::step1, Phase::collector_up, Phase::dyn_g}) {
        const PhaseTotals& t = at(p);
        if (t.messages > 0) return double(t.coefficients) / double(t.messages);
    }
    return 0.0;
}

double OverheadLedger::d1_measured() const {
    const PhaseTotals& t = at(Phase::step3);
    if (t.messages == 0) return 0.0;
    return double(t.coefficients) / double(t.messages);
}

Bus::Bus(int num_nodes, MeterConfig cfg) : num_nodes_(num_nodes), cfg_(cfg) {
    if (num_nodes < 1) throw ConfigError("Bus: need at least one node");
    mailbox_.resize(std::size_t(num_nodes));
}

void Bus::meter(ModelMessage& msg) {
    msg.non_null_count = msg.payload.non_null_count(cfg_.eps_zero);
    msg.byte_size = msg.non_null_count * cfg_.bytes_per_coeff;
    if (cfg_.indexed_sparse && msg.non_null_count < msg.payload.coef.size())
        msg.byte_size += 4 * msg.non_null_count;

    PhaseTotals& t = totals_[int(msg.phase)];
    ++t.messages;
    t.coefficients += msg.non_null_count;
    t.bytes += msg.byte_size;
    msg.sequence = sequence_++;
    if (cfg_.record_rows) rows_.push_back(msg);
}

ModelMessage Bus::send(int src, int dst, Phase phase, const LinearModel& model) {
    if (src == dst) throw ProtocolError("bus: self-send from node " + std::to_string(src));
    if (src < 0 || src >= num_nodes_ || dst < 0 || dst >= num_nodes_)
        throw ProtocolError("bus: unknown endpoint " + std::to_string(src < 0 || src >= num_nodes_ ? src : dst));
    if (!model.all_finite()) throw ProtocolError("bus: payload has non-finite coefficients");

    std::lock_guard<std::mutex> lk(mutex_);
    ModelMessage msg;
    msg.src = src;
    msg.dst = dst;
    msg.phase = phase;
    msg.kind = PayloadKind::model;
    msg.payload = model;
    meter(msg);
    mailbox_[std::size_t(dst)].push_back(msg);
    return msg;
}

void Bus::send_raw_data(int src, int dst, Phase phase, std::size_t nbytes) {
    if (src == dst) throw ProtocolError("bus: self-send from node " + std::to_string(src));
    if (src < 0 || src >= num_nodes_ || dst < 0 || dst >= num_nodes_)
        throw ProtocolError("bus: unknown endpoint");
    std::lock_guard<std::mutex> lk(mutex_);
    ModelMessage msg;
    msg.src = src;
    msg.dst = dst;
    msg.phase = phase;
    msg.kind = PayloadKind::raw_data;
    msg.byte_size = nbytes;
    msg.sequence = sequence_++;
    ++non_model_payloads_;
    PhaseTotals& t = totals_[int(phase)];
    ++t.messages;
    t.bytes += nbytes;
    if (cfg_.record_rows) rows_.push_back(msg);
}

std::vector<ModelMessage> Bus::drain(int dst) {
    if (dst < 0 || dst >= num_nodes_) throw ProtocolError("bus: unknown mailbox");
    std::lock_guard<std::mutex> lk(mutex_);
    std::vector<ModelMessage> out;
    out.swap(mailbox_[std::size_t(dst)]);
    return out;
}

PhaseTotals Bus::totals(Phase p) const {
    std::lock_guard<std::mutex> lk(mutex_);
    return totals_[int(p)];
}

std::size_t Bus::total_coefficients() const {
    std::lock_guard<std::mutex> lk(mutex_);
    std::size_t t = 0;
    for (const auto& ph : totals_) t += ph.coefficients;
    return t;
}

std::size_t Bus::total_bytes() const {
    std::lock_guard<std::mutex> lk(mutex_);
    std::size_t t = 0;
    for (const auto& ph : totals_) t += ph.bytes;
    return t;
}

std::size_t Bus::total_messages() const {
    std::lock_guard<std::mutex> lk(mutex_);
    return sequence_;
}

std::size_t Bus::non_model_payloads() const {
    std::lock_guard<std::mutex> lk(mutex_);
    return non_model_payloads_;
}

OverheadLedger Bus::ledger() const {
    std::lock_guard<std::mutex> lk(mutex_);
    OverheadLedger led;
    led.bytes_per_coeff = cfg_.bytes_per_coeff;
    led.non_model_payloads = non_model_payloads_;
    for (int i = 0; i < kNumPhases; ++i) led.phases[i] = totals_[i];
    return led;
}

std::vector<ModelMessage> Bus::rows() const {
    std::lock_guard<std::mutex> lk(mutex_);
    return rows_;
}

// --- formulas ----------------------------------------------------------------

GtlOverheadPrediction predict_overhead_gtl(int s, int k, double d0, double d1) {
    if (s < 2) throw ConfigError("predict_overhead_gtl: s must be >= 2");
    GtlOverheadPrediction p;
    p.oh0 = double(s) * double(s - 1) * d0 * double(k);
    p.oh1 = double(s) * double(s - 1) * d1 * double(k);
    p.total = p.oh0 + p.oh1;
    return p;
}

NohtlOverheadPrediction predict_overhead_nohtl(int s, int k, double d0) {
    if (s < 2) throw ConfigError("predict_overhead_nohtl: s must be >= 2");
    NohtlOverheadPrediction p;
    p.mu = 2.0 * double(k) * double(s - 1) * d0;
    p.mv = double(k) * double(s) * double(s - 1) * d0;
    return p;
}

double overhead_bound(int s, int k, double d0) {
    if (s < 2) throw ConfigError("overhead_bound: s must be >= 2");
    return 2.0 * double(k) * double(s) * double(s) * d0;
}

GainBound gain_lower_bound(int s, int k, double d0, double N, double dc) {
    if (N <= 0.0 || dc <= 0.0) throw ConfigError("gain_lower_bound: N and dc must be positive");
    GainBound g;
    g.exact = 1.0 - overhead_bound(s, k, d0) / (N * dc);
    g.approx_same_d = 1.0 - 2.0 * double(k) * double(s) * double(s) / N;
    g.mu_d = N / double(s);
    g.approx_mu = 1.0 - 2.0 * double(k) * double(s) / g.mu_d;
    return g;
}

double overhead_dyn_g(int batch, int k, double d0) {
    if (batch < 1) throw ConfigError("overhead_dyn_g: batch must be >= 1");
    return double(batch + 1) * double(k) * d0;
}

// --- reconciliation ------------------------------------------------------------

namespace {

void add_line(Reconciliation& rec, const OverheadLedger& led, Phase p, double predicted,
              std::size_t expected_messages) {
    const PhaseTotals& t = led.at(p);
    ReconLine line;
    line.phase = to_string(p);
    line.metered = double(t.coefficients);
    line.predicted = predicted;
    line.residual = line.metered - predicted;
    line.expected_messages = expected_messages;
    line.actual_messages = t.messages;
    rec.lines.push_back(line);
}

}  // namespace

Reconciliation reconcile(const OverheadLedger& led) {
    Reconciliation rec;
    const int s = led.s, k = led.k;
    const double d0 = led.d0_measured();
    const double d1 = led.d1_measured();
    const int a = led.num_aggregators > 0 ? led.num_aggregators : s;

    auto mean_of = [&](Phase p) {
        const PhaseTotals& t = led.at(p);
        return t.messages ? double(t.coefficients) / double(t.messages) : 0.0;
    };

    if (led.protocol == "gtl" || led.protocol == "gtl_limited") {
        // Every node ships its k base models to each aggregator but itself:
        // a(s-1) model transfers per class.
        std::size_t m1 = std::size_t(a) * std::size_t(s - 1) * std::size_t(k);
        add_line(rec, led, Phase::step1, double(m1) * d0, m1);
        std::size_t m3 = std::size_t(a) * std::size_t(a - 1) * std::size_t(k);
        add_line(rec, led, Phase::step3, double(m3) * d1, m3);
        if (a < s) {
            std::size_t md = std::size_t(s - a) * std::size_t(k);
            add_line(rec, led, Phase::collector_down, double(md) * mean_of(Phase::collector_down),
                     md);
        }
        rec.bound = overhead_bound(s, k, d0);
        rec.bound_applicable = d1 <= d0 && led.protocol == "gtl";
    } else if (led.protocol == "nohtl_mu") {
        std::size_t up = std::size_t(s - 1) * std::size_t(k);
        add_line(rec, led, Phase::collector_up, double(up) * mean_of(Phase::collector_up), up);
        add_line(rec, led, Phase::collector_down, double(up) * mean_of(Phase::collector_down), up);
    } else if (led.protocol == "nohtl_mv") {
        std::size_t m1 = std::size_t(s) * std::size_t(s - 1) * std::size_t(k);
        add_line(rec, led, Phase::step1, double(m1) * d0, m1);
    } else if (led.protocol == "dyn_gtl" || led.protocol == "dyn_nohtl") {
        const PhaseTotals& t = led.at(Phase::dyn_g);
        add_line(rec, led, Phase::dyn_g, double(t.messages) * mean_of(Phase::dyn_g), t.messages);
        if (led.protocol == "dyn_gtl" && led.at(Phase::step1).messages > 0) {
            std::size_t m1 = led.at(Phase::step1).messages;
            add_line(rec, led, Phase::step1, double(m1) * mean_of(Phase::step1), m1);
            std::size_t m3 = led.at(Phase::step3).messages;
            add_line(rec, led, Phase::step3, double(m3) * mean_of(Phase::step3), m3);
        }
    }

    rec.metered_total = double(led.total_coefficients());
    for (const auto& line : rec.lines) rec.predicted_total += line.predicted;
    if (rec.bound_applicable) rec.within_bound = rec.metered_total <= rec.bound;
    return rec;
}

std::string rows_csv(const std::vector<ModelMessage>& rows) {
    std::ostringstream out;
    out << "sequence,phase,src,dst,kind,count,bytes\n";
    for (const auto& r : rows) {
        out << r.sequence << ',' << to_string(r.phase) << ',' << r.src << ',' << r.dst << ','
            << (r.kind == PayloadKind::model ? "model" : "raw_data") << ',' << r.non_null_count
            << ',' << r.byte_size << '\n';
    }
    return out.str();
}

std::string summary_json(const OverheadLedger& led, const Reconciliation& rec) {
    nlohmann::json j;
    j["protocol"] = led.protocol;
    j["s"] = led.s;
    j["k"] = led.k;
    j["num_aggregators"] = led.num_aggregators;
    j["batch"] = led.batch;
    j["N"] = led.N;
    j["dc"] = led.dc;
    j["bytes_per_coeff"] = led.bytes_per_coeff;
    j["d0_measured"] = led.d0_measured();
    j["d1_measured"] = led.d1_measured();
    j["total_coefficients"] = led.total_coefficients();
    j["total_bytes"] = led.total_bytes();
    j["total_messages"] = led.total_messages();
    j["non_model_payloads"] = led.non_model_payloads;
    for (int i = 0; i < kNumPhases; ++i) {
        const PhaseTotals& t = led.phases[i];
        if (t.messages == 0) continue;
        nlohmann::json ph;
        ph["messages"] = t.messages;
        ph["coefficients"] = t.coefficients;
        ph["bytes"] = t.bytes;
        j["phases"][to_string(Phase(i))] = ph;
    }
    nlohmann::json lines = nlohmann::json::array();
    for (const auto& line : rec.lines) {
        lines.push_back({{"phase", line.phase},
                         {"metered", line.metered},
                         {"predicted", line.predicted},
                         {"residual", line.residual},
                         {"expected_messages", line.expected_messages},
                         {"actual_messages", line.actual_messages}});
    }
    j["reconciliation"]["lines"] = lines;
    j["reconciliation"]["metered_total"] = rec.metered_total;
    j["reconciliation"]["predicted_total"] = rec.predicted_total;
    j["reconciliation"]["bound"] = rec.bound;
    j["reconciliation"]["bound_applicable"] = rec.bound_applicable;
    j["reconciliation"]["within_bound"] = rec.within_bound;
    return j.dump(2);
}

}  // namespace edgelearn::netsim
