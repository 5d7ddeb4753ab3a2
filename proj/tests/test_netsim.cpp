#include "doctest.h"

#include <string>
#include <vector>

#include "edgelearn/common.hpp"
#include "edgelearn/netsim.hpp"

using namespace edgelearn;

namespace {

LinearModel dense_model(std::size_t nonnull) {
    // nonnull coefficients total, intercept included.
    LinearModel m = LinearModel::zeros(nonnull - 1, 0, ModelKind::base,
                                       "raw:" + std::to_string(nonnull - 1));
    for (std::size_t i = 0; i + 1 < nonnull; ++i) m.coef[i] = 0.5 + double(i);
    m.intercept() = 1.0;
    return m;
}

}  // namespace

TEST_CASE("meter counts non-null coefficients and bytes") {
    netsim::Bus bus(3);
    LinearModel m = dense_model(5);
    m.coef[1] = 0.0;  // now 4 non-null
    auto msg = bus.send(0, 1, netsim::Phase::step1, m);
    CHECK(msg.non_null_count == 4);
    CHECK(msg.byte_size == 32);
    auto t = bus.totals(netsim::Phase::step1);
    CHECK(t.messages == 1);
    CHECK(t.coefficients == 4);
    CHECK(t.bytes == 32);
}

TEST_CASE("eps_zero treats tiny coefficients as null") {
    netsim::MeterConfig cfg;
    cfg.eps_zero = 1e-12;
    netsim::Bus bus(2, cfg);
    LinearModel m = dense_model(3);
    m.coef[0] = 1e-13;
    auto msg = bus.send(0, 1, netsim::Phase::step1, m);
    CHECK(msg.non_null_count == 2);
}

TEST_CASE("indexed sparse payloads pay 4 bytes per index") {
    netsim::MeterConfig cfg;
    cfg.indexed_sparse = true;
    netsim::Bus bus(2, cfg);
    LinearModel sparse = dense_model(4);
    sparse.coef[0] = sparse.coef[1] = 0.0;  // 2 of 4 slots non-null
    auto msg = bus.send(0, 1, netsim::Phase::step3, sparse);
    CHECK(msg.non_null_count == 2);
    CHECK(msg.byte_size == 2 * 8 + 2 * 4);
    LinearModel dense = dense_model(4);  // fully dense: no index cost
    auto msg2 = bus.send(0, 1, netsim::Phase::step3, dense);
    CHECK(msg2.byte_size == 4 * 8);
}

TEST_CASE("routing errors are rejected") {
    netsim::Bus bus(2);
    LinearModel m = dense_model(3);
    CHECK_THROWS_AS(bus.send(0, 0, netsim::Phase::step1, m), ProtocolError);
    CHECK_THROWS_AS(bus.send(0, 5, netsim::Phase::step1, m), ProtocolError);
    CHECK_THROWS_AS(bus.send(-1, 1, netsim::Phase::step1, m), ProtocolError);
    LinearModel bad = dense_model(3);
    bad.coef[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(bus.send(0, 1, netsim::Phase::step1, bad), ProtocolError);
}

TEST_CASE("mailboxes drain in send order") {
    netsim::Bus bus(3);
    LinearModel a = dense_model(2), b = dense_model(3);
    bus.send(0, 2, netsim::Phase::step1, a);
    bus.send(1, 2, netsim::Phase::step1, b);
    auto mail = bus.drain(2);
    REQUIRE(mail.size() == 2);
    CHECK(mail[0].src == 0);
    CHECK(mail[1].src == 1);
    CHECK(mail[0].sequence < mail[1].sequence);
    CHECK(bus.drain(2).empty());
}

TEST_CASE("raw-data payloads trip the egress audit") {
    netsim::Bus bus(2);
    CHECK(bus.non_model_payloads() == 0);
    bus.send_raw_data(0, 1, netsim::Phase::step1, 1024);
    CHECK(bus.non_model_payloads() == 1);
    CHECK(bus.ledger().non_model_payloads == 1);
}

TEST_CASE("record_rows retains one row per message for CSV export") {
    netsim::MeterConfig cfg;
    cfg.record_rows = true;
    netsim::Bus bus(2, cfg);
    bus.send(0, 1, netsim::Phase::step1, dense_model(3));
    bus.send(1, 0, netsim::Phase::step3, dense_model(4));
    auto rows = bus.rows();
    REQUIRE(rows.size() == 2);
    auto csv = netsim::rows_csv(rows);
    CHECK(csv.find("step1") != std::string::npos);
    CHECK(csv.find("step3") != std::string::npos);
}

TEST_CASE("analytical formulas match their closed forms") {
    auto gtl = netsim::predict_overhead_gtl(21, 12, 562.0, 51.0);
    CHECK(gtl.oh0 == doctest::Approx(21.0 * 20.0 * 562.0 * 12.0));
    CHECK(gtl.oh1 == doctest::Approx(21.0 * 20.0 * 51.0 * 12.0));
    CHECK(gtl.total == doctest::Approx(gtl.oh0 + gtl.oh1));

    auto nohtl = netsim::predict_overhead_nohtl(21, 12, 562.0);
    CHECK(nohtl.mu == doctest::Approx(2.0 * 12.0 * 20.0 * 562.0));
    CHECK(nohtl.mv == doctest::Approx(12.0 * 21.0 * 20.0 * 562.0));

    CHECK(netsim::overhead_bound(21, 12, 562.0) == doctest::Approx(2.0 * 12.0 * 441.0 * 562.0));

    auto gain = netsim::gain_lower_bound(21, 12, 562.0, 10929.0, 561.0);
    CHECK(gain.exact ==
          doctest::Approx(1.0 - 2.0 * 12.0 * 441.0 * 562.0 / (10929.0 * 561.0)));
    CHECK(gain.approx_same_d == doctest::Approx(1.0 - 2.0 * 12.0 * 441.0 / 10929.0));
    CHECK(gain.mu_d == doctest::Approx(10929.0 / 21.0));
    CHECK(gain.approx_mu == doctest::Approx(1.0 - 2.0 * 12.0 * 21.0 / gain.mu_d));

    CHECK(netsim::overhead_dyn_g(4, 12, 562.0) == doctest::Approx(5.0 * 12.0 * 562.0));
}

TEST_CASE("reconciliation of a hand-driven broadcast is exact") {
    // 3 nodes, 2 classes, all-to-all step1 with d0 = 7 dense payloads.
    const int s = 3, k = 2;
    netsim::Bus bus(s);
    LinearModel m = dense_model(7);
    for (int src = 0; src < s; ++src)
        for (int dst = 0; dst < s; ++dst) {
            if (src == dst) continue;
            for (int c = 0; c < k; ++c) bus.send(src, dst, netsim::Phase::step1, m);
        }
    auto led = bus.ledger();
    led.protocol = "nohtl_mv";
    led.s = s;
    led.k = k;
    CHECK(led.at(netsim::Phase::step1).coefficients == std::size_t(s * (s - 1) * k * 7));
    CHECK(led.d0_measured() == doctest::Approx(7.0));

    auto rec = netsim::reconcile(led);
    REQUIRE(!rec.lines.empty());
    for (const auto& line : rec.lines) {
        CHECK(line.residual == doctest::Approx(0.0));
        CHECK(line.expected_messages == line.actual_messages);
    }
    CHECK(rec.metered_total == doctest::Approx(rec.predicted_total));
}

TEST_CASE("ledger d1 comes from step3 payloads only") {
    netsim::Bus bus(2);
    bus.send(0, 1, netsim::Phase::step1, dense_model(10));
    bus.send(0, 1, netsim::Phase::step3, dense_model(4));
    auto led = bus.ledger();
    CHECK(led.d0_measured() == doctest::Approx(10.0));
    CHECK(led.d1_measured() == doctest::Approx(4.0));
}

TEST_CASE("formula guards reject degenerate shapes") {
    CHECK_THROWS_AS(netsim::predict_overhead_gtl(1, 2, 5.0, 5.0), ConfigError);
    CHECK_THROWS_AS(netsim::predict_overhead_nohtl(1, 2, 5.0), ConfigError);
    CHECK_THROWS_AS(netsim::overhead_bound(0, 2, 5.0), ConfigError);
    CHECK_THROWS_AS(netsim::gain_lower_bound(2, 2, 5.0, 0.0, 5.0), ConfigError);
    CHECK_THROWS_AS(netsim::overhead_dyn_g(0, 2, 5.0), ConfigError);
    CHECK_THROWS_AS(netsim::Bus(0), ConfigError);
}
