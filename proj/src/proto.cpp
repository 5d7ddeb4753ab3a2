#include "edgelearn/proto.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "edgelearn/common.hpp"

namespace edgelearn::proto {

namespace {

constexpr std::uint64_t kSvmTag = 0x535631ull;   // step-0 SVM streams
constexpr std::uint64_t kGtlTag = 0x47544cull;   // step-2 GreedyTL streams
constexpr std::uint64_t kMalTag = 0x4d414cull;   // corruption streams
constexpr std::uint64_t kAggTag = 0x414747ull;   // aggregator selection

int infer_classes(const std::vector<data::LocalDataset>& locals, int configured) {
    if (configured > 0) return configured;
    int k = 0;
    for (const auto& loc : locals)
        for (const auto& s : loc.samples) k = std::max(k, s.label);
    if (k < 2) throw ConfigError("protocol: fewer than two classes in the data");
    return k;
}

std::string space_id(std::size_t d) { return "raw:" + std::to_string(d); }

std::size_t common_dim(const std::vector<data::LocalDataset>& locals) {
    std::size_t d = 0;
    for (const auto& loc : locals) {
        if (loc.samples.empty()) throw ConfigError("protocol: empty location dataset");
        std::size_t ld = loc.dim();
        if (d == 0) d = ld;
        if (ld != d) throw DimensionError("protocol: locations disagree on feature dimension");
    }
    return d;
}

// Malicious1 node selection: s' = round(f*s) distinct nodes, seeded.
std::vector<int> select_malicious(int s, const MaliciousConfig& malice) {
    if (malice.mode == MaliciousConfig::Mode::none) return {};
    if (malice.mode == MaliciousConfig::Mode::malicious2) {
        std::vector<int> all(s);
        std::iota(all.begin(), all.end(), 0);
        return all;
    }
    int count = int(std::lround(malice.node_fraction * double(s)));
    count = std::clamp(count, 0, s);
    std::vector<int> ids(s);
    std::iota(ids.begin(), ids.end(), 0);
    std::mt19937_64 rng(derive_seed(malice.seed, kMalTag, 0x53454cull));
    for (int i = 0; i < count; ++i) {
        std::uniform_int_distribution<int> pick(i, s - 1);
        std::swap(ids[i], ids[pick(rng)]);
    }
    ids.resize(std::size_t(count));
    std::sort(ids.begin(), ids.end());
    return ids;
}

// The step-1 payload a sender broadcasts: its honest per-class models, or the
// corrupted copies if the sender is malicious. Corruption happens once per
// (sender, class); every recipient sees the same bytes.
std::vector<LinearModel> outgoing_payloads(const multiclass::OvaClassifier& h0, int sender,
                                           bool sender_malicious, const MaliciousConfig& malice) {
    std::vector<LinearModel> out = h0.models;
    if (!sender_malicious) return out;
    for (std::size_t c = 0; c < out.size(); ++c) {
        std::mt19937_64 rng(
            derive_seed(malice.seed, kMalTag, std::uint64_t(sender), std::uint64_t(c)));
        out[c] = corrupt(out[c], malice, rng);
    }
    return out;
}

// Rebuild the per-class, per-sender store from a drained mailbox. Each sender
// transmits its k models in class order, so within one (src,dst) pair the
// arrival index is the class index.
void fill_sources_from_mailbox(Node& node, const std::vector<netsim::ModelMessage>& mail,
                               netsim::Phase phase, int k) {
    std::map<int, int> seen;  // src -> class counter
    for (const auto& msg : mail) {
        if (msg.phase != phase) continue;
        int c = seen[msg.src]++;
        if (c >= k) throw ProtocolError("protocol: more models than classes from one sender");
        node.sources_per_class[std::size_t(c)][std::size_t(msg.src)] = msg.payload;
    }
}

std::vector<int> binarize(const std::vector<data::Sample>& samples, int c) {
    std::vector<int> targets(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
        targets[i] = samples[i].label == c ? +1 : -1;
    return targets;
}

}  // namespace

Procedure procedure_from_string(const std::string& s) {
    if (s == "gtl") return Procedure::gtl;
    if (s == "nohtl_mu") return Procedure::nohtl_mu;
    if (s == "nohtl_mv") return Procedure::nohtl_mv;
    if (s == "gtl_limited") return Procedure::gtl_limited;
    if (s == "dyn_gtl") return Procedure::dyn_gtl;
    if (s == "dyn_nohtl") return Procedure::dyn_nohtl;
    throw ConfigError("unknown procedure: " + s);
}

std::string to_string(Procedure p) {
    switch (p) {
        case Procedure::gtl: return "gtl";
        case Procedure::nohtl_mu: return "nohtl_mu";
        case Procedure::nohtl_mv: return "nohtl_mv";
        case Procedure::gtl_limited: return "gtl_limited";
        case Procedure::dyn_gtl: return "dyn_gtl";
        default: return "dyn_nohtl";
    }
}

multiclass::OvaClassifier train_local(const data::LocalDataset& local, int k,
                                      const learn::SvmConfig& svm, bool standardize,
                                      std::uint64_t seed, data::Scaler* out_scaler) {
    const std::size_t d = local.dim();
    data::Scaler scaler =
        standardize ? data::Scaler::fit(local.samples) : data::Scaler::identity(d);
    std::vector<std::vector<double>> z = scaler.transform_all(local.samples);
    std::vector<const double*> rows(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) rows[i] = z[i].data();

    multiclass::OvaClassifier clf = multiclass::train_ova(
        local.samples, k, [&](int c, const std::vector<int>& targets) {
            learn::SvmConfig per_class = svm;
            per_class.seed = derive_seed(seed, std::uint64_t(c));
            LinearModel m = learn::train_svm(rows, targets, d, per_class);
            m = learn::fold_back(m, scaler);
            m.feature_space_id = space_id(d);
            return m;
        });
    if (out_scaler) *out_scaler = scaler;
    return clf;
}

LinearModel corrupt(const LinearModel& model, const MaliciousConfig& cfg, std::mt19937_64& rng) {
    LinearModel out = model;
    std::normal_distribution<double> gauss(0.0, 1.0);
    if (cfg.mode == MaliciousConfig::Mode::malicious1) {
        for (double& v : out.coef) v = gauss(rng);
        out.degenerate = false;
    } else if (cfg.mode == MaliciousConfig::Mode::malicious2) {
        std::bernoulli_distribution flip(cfg.param_probability);
        for (double& v : out.coef) {
            // Draw the replacement unconditionally so the consumed random
            // stream does not depend on the flip outcomes.
            double repl = gauss(rng);
            if (flip(rng)) {
                v = repl;
                out.degenerate = false;
            }
        }
    }
    return out;
}

GtlRunResult run_gtl(const std::vector<data::LocalDataset>& locals, const ProtocolConfig& cfg,
                     netsim::Bus& bus, const MaliciousConfig& malice) {
    ProtocolConfig full = cfg;
    full.num_aggregators = int(locals.size());
    GtlRunResult res = run_gtl_limited(locals, full, bus, malice);
    res.ledger.protocol = "gtl";
    return res;
}

GtlRunResult run_gtl_limited(const std::vector<data::LocalDataset>& locals,
                             const ProtocolConfig& cfg, netsim::Bus& bus,
                             const MaliciousConfig& malice) {
    const int s = int(locals.size());
    if (s < 2) throw ConfigError("run_gtl: need at least two locations");
    if (bus.num_nodes() < s) throw ProtocolError("run_gtl: bus is smaller than the location set");
    const int k = infer_classes(locals, cfg.num_classes);
    const std::size_t d = common_dim(locals);
    const unsigned threads = cfg.threads ? cfg.threads : default_threads();

    int a = cfg.num_aggregators <= 0 ? s : cfg.num_aggregators;
    if (a > s) throw ConfigError("run_gtl_limited: more aggregators than nodes");

    GtlRunResult res;
    res.malicious_nodes = select_malicious(s, malice);
    res.aggregator_ids.resize(std::size_t(a));
    if (cfg.random_aggregators) {
        std::vector<int> ids(static_cast<std::size_t>(s));
        std::iota(ids.begin(), ids.end(), 0);
        std::mt19937_64 rng(derive_seed(cfg.seed, kAggTag));
        for (int i = 0; i < a; ++i) {
            std::uniform_int_distribution<int> pick(i, s - 1);
            std::swap(ids[std::size_t(i)], ids[std::size_t(pick(rng))]);
        }
        std::copy(ids.begin(), ids.begin() + a, res.aggregator_ids.begin());
        std::sort(res.aggregator_ids.begin(), res.aggregator_ids.end());
    } else {
        std::iota(res.aggregator_ids.begin(), res.aggregator_ids.end(), 0);
    }
    std::vector<char> is_agg(std::size_t(s), 0);
    for (int id : res.aggregator_ids) is_agg[std::size_t(id)] = 1;

    // Step 0: local one-vs-all SVMs, concurrently per location.
    res.nodes.resize(std::size_t(s));
    parallel_for(std::size_t(s), threads, [&](std::size_t l) {
        Node& node = res.nodes[l];
        node.location_id = int(l);
        node.is_aggregator = is_agg[l] != 0;
        node.h0 = train_local(locals[l], k, cfg.svm, cfg.standardize,
                              derive_seed(cfg.seed, kSvmTag, std::uint64_t(l)), &node.scaler);
    });

    std::vector<char> is_mal(std::size_t(s), 0);
    for (int id : res.malicious_nodes) is_mal[std::size_t(id)] = 1;

    // Step 1: every node ships its k models to every aggregator but itself.
    // Sends run on this thread in ascending (sender, receiver) order, so the
    // meter and mailboxes are deterministic. A sender's own source slot holds
    // the same payload it broadcast: the model a node injected into the
    // system is its contribution everywhere, so all aggregators reason about
    // one identical source set even when that payload was corrupted.
    std::vector<std::vector<LinearModel>> injected(static_cast<std::size_t>(s));
    for (int sender = 0; sender < s; ++sender)
        injected[std::size_t(sender)] = outgoing_payloads(
            res.nodes[std::size_t(sender)].h0, sender, is_mal[std::size_t(sender)] != 0, malice);
    for (int sender = 0; sender < s; ++sender)
        for (int agg : res.aggregator_ids) {
            if (agg == sender) continue;
            for (int c = 0; c < k; ++c)
                bus.send(sender, agg, netsim::Phase::step1,
                         injected[std::size_t(sender)][std::size_t(c)]);
        }
    for (int agg : res.aggregator_ids) {
        Node& node = res.nodes[std::size_t(agg)];
        node.sources_per_class.assign(std::size_t(k), learn::SourceSet(std::size_t(s)));
        fill_sources_from_mailbox(node, bus.drain(agg), netsim::Phase::step1, k);
        for (int c = 0; c < k; ++c)
            node.sources_per_class[std::size_t(c)][std::size_t(agg)] =
                injected[std::size_t(agg)][std::size_t(c)];
    }

    // Step 2: per-class GreedyTL at each aggregator, concurrently per
    // (aggregator, class) pair. Seeds depend only on (location, class) so the
    // trajectory is identical for any aggregator subset.
    std::vector<std::pair<int, int>> tasks;
    for (int agg : res.aggregator_ids)
        for (int c = 1; c <= k; ++c) tasks.emplace_back(agg, c);
    for (int agg : res.aggregator_ids)
        res.nodes[std::size_t(agg)].h2.models.assign(std::size_t(k),
                                                     LinearModel::zeros(d, std::size_t(s),
                                                                        ModelKind::gtl, space_id(d)));
    parallel_for(tasks.size(), threads, [&](std::size_t ti) {
        auto [agg, c] = tasks[ti];
        Node& node = res.nodes[std::size_t(agg)];
        learn::GreedyTLConfig per_class = cfg.gtl;
        per_class.seed = derive_seed(cfg.seed, kGtlTag, std::uint64_t(agg), std::uint64_t(c));
        LinearModel m =
            learn::greedy_tl(locals[std::size_t(agg)].samples, binarize(locals[std::size_t(agg)].samples, c),
                             node.scaler, node.sources_per_class[std::size_t(c - 1)], per_class);
        m.feature_space_id = space_id(d);
        node.h2.models[std::size_t(c - 1)] = m;
    });

    // Step 3: aggregators exchange their GreedyTL models.
    for (int src : res.aggregator_ids) {
        for (int dst : res.aggregator_ids) {
            if (src == dst) continue;
            for (int c = 0; c < k; ++c)
                bus.send(src, dst, netsim::Phase::step3,
                         res.nodes[std::size_t(src)].h2.models[std::size_t(c)]);
        }
    }

    // Step 4: consensus mean over all aggregator models (identical at every
    // aggregator: same inputs in the same ascending-id order).
    std::map<int, multiclass::OvaClassifier> h2_store;  // src -> classifier
    {
        int first_agg = res.aggregator_ids.front();
        std::vector<netsim::ModelMessage> mail = bus.drain(first_agg);
        for (int agg : res.aggregator_ids) h2_store[agg].models.resize(std::size_t(k));
        std::map<int, int> seen;
        for (const auto& msg : mail) {
            if (msg.phase != netsim::Phase::step3) continue;
            h2_store[msg.src].models[std::size_t(seen[msg.src]++)] = msg.payload;
        }
        h2_store[first_agg] = res.nodes[std::size_t(first_agg)].h2;
        for (int agg : res.aggregator_ids)
            if (agg != first_agg) bus.drain(agg);  // others' copies are identical
    }
    std::vector<multiclass::OvaClassifier> ordered;
    ordered.reserve(std::size_t(a));
    for (int agg : res.aggregator_ids) ordered.push_back(h2_store[agg]);
    res.aggregate = multiclass::consensus_mean(ordered);
    for (int agg : res.aggregator_ids) res.nodes[std::size_t(agg)].h4 = res.aggregate;

    // Final distribution: the designated aggregator ships the aggregate to the
    // remaining nodes (nothing to do when everyone aggregated).
    int designated = res.aggregator_ids.front();
    for (int dst = 0; dst < s; ++dst) {
        if (is_agg[std::size_t(dst)]) continue;
        for (int c = 0; c < k; ++c)
            bus.send(designated, dst, netsim::Phase::collector_down,
                     res.aggregate.models[std::size_t(c)]);
        res.nodes[std::size_t(dst)].h4 = res.aggregate;
        bus.drain(dst);
    }

    res.ledger = bus.ledger();
    res.ledger.protocol = "gtl_limited";
    res.ledger.s = s;
    res.ledger.k = k;
    res.ledger.num_aggregators = a;
    return res;
}

NohtlRunResult run_nohtl(const std::vector<data::LocalDataset>& locals, const ProtocolConfig& cfg,
                         netsim::Bus& bus, const MaliciousConfig& malice) {
    const int s = int(locals.size());
    if (s < 2) throw ConfigError("run_nohtl: need at least two locations");
    if (bus.num_nodes() < s) throw ProtocolError("run_nohtl: bus is smaller than the location set");
    const bool mu = cfg.procedure != Procedure::nohtl_mv;
    const int k = infer_classes(locals, cfg.num_classes);
    const unsigned threads = cfg.threads ? cfg.threads : default_threads();
    if (mu && (cfg.collector_id < 0 || cfg.collector_id >= s))
        throw ConfigError("run_nohtl: collector_id outside the location set");

    NohtlRunResult res;
    res.malicious_nodes = select_malicious(s, malice);
    res.nodes.resize(std::size_t(s));
    parallel_for(std::size_t(s), threads, [&](std::size_t l) {
        Node& node = res.nodes[l];
        node.location_id = int(l);
        node.h0 = train_local(locals[l], k, cfg.svm, cfg.standardize,
                              derive_seed(cfg.seed, kSvmTag, std::uint64_t(l)), &node.scaler);
    });

    std::vector<char> is_mal(std::size_t(s), 0);
    for (int id : res.malicious_nodes) is_mal[std::size_t(id)] = 1;

    if (mu) {
        const int collector = cfg.collector_id;
        for (int sender = 0; sender < s; ++sender) {
            if (sender == collector) continue;
            std::vector<LinearModel> payloads = outgoing_payloads(
                res.nodes[std::size_t(sender)].h0, sender, is_mal[std::size_t(sender)] != 0, malice);
            for (int c = 0; c < k; ++c)
                bus.send(sender, collector, netsim::Phase::collector_up, payloads[std::size_t(c)]);
        }
        Node& hub = res.nodes[std::size_t(collector)];
        hub.sources_per_class.assign(std::size_t(k), learn::SourceSet(std::size_t(s)));
        fill_sources_from_mailbox(hub, bus.drain(collector), netsim::Phase::collector_up, k);
        // The collector contributes what it would have injected, so a
        // malicious collector corrupts its own share of the mean as well.
        std::vector<LinearModel> own = outgoing_payloads(
            hub.h0, collector, is_mal[std::size_t(collector)] != 0, malice);
        for (int c = 0; c < k; ++c)
            hub.sources_per_class[std::size_t(c)][std::size_t(collector)] =
                own[std::size_t(c)];

        res.mean_model.models.reserve(std::size_t(k));
        for (int c = 0; c < k; ++c)
            res.mean_model.models.push_back(
                multiclass::consensus_mean(hub.sources_per_class[std::size_t(c)]));

        for (int dst = 0; dst < s; ++dst) {
            if (dst == collector) continue;
            for (int c = 0; c < k; ++c)
                bus.send(collector, dst, netsim::Phase::collector_down,
                         res.mean_model.models[std::size_t(c)]);
            bus.drain(dst);
        }
        res.ledger = bus.ledger();
        res.ledger.protocol = "nohtl_mu";
    } else {
        std::vector<std::vector<LinearModel>> injected(static_cast<std::size_t>(s));
        for (int sender = 0; sender < s; ++sender)
            injected[std::size_t(sender)] = outgoing_payloads(
                res.nodes[std::size_t(sender)].h0, sender, is_mal[std::size_t(sender)] != 0, malice);
        for (int sender = 0; sender < s; ++sender)
            for (int dst = 0; dst < s; ++dst) {
                if (dst == sender) continue;
                for (int c = 0; c < k; ++c)
                    bus.send(sender, dst, netsim::Phase::step1,
                             injected[std::size_t(sender)][std::size_t(c)]);
            }
        for (int dst = 0; dst < s; ++dst) {
            Node& node = res.nodes[std::size_t(dst)];
            node.sources_per_class.assign(std::size_t(k), learn::SourceSet(std::size_t(s)));
            fill_sources_from_mailbox(node, bus.drain(dst), netsim::Phase::step1, k);
            for (int c = 0; c < k; ++c)
                node.sources_per_class[std::size_t(c)][std::size_t(dst)] =
                    injected[std::size_t(dst)][std::size_t(c)];
        }
        res.ledger = bus.ledger();
        res.ledger.protocol = "nohtl_mv";
    }
    res.ledger.s = s;
    res.ledger.k = k;
    return res;
}

namespace {

// Folds the beta block of an augmented-space aggregate into raw coordinates:
// w += sum_i beta_i w_src_i, b += sum_i beta_i b_src_i. Exact when source
// predictions were not clipped during the fit.
LinearModel flatten_to_raw(const LinearModel& m, const learn::SourceSet& sources) {
    if (m.num_sources != sources.size())
        throw DimensionError("flatten_to_raw: beta block does not match the source set");
    LinearModel flat = LinearModel::zeros(m.dim, 0, ModelKind::aggregate, m.feature_space_id);
    for (std::size_t j = 0; j < m.dim; ++j) flat.coef[j] = m.coef[j];
    flat.intercept() = m.intercept();
    const double* beta = m.betas();
    for (std::size_t i = 0; i < sources.size(); ++i) {
        const LinearModel& src = sources[i];
        for (std::size_t j = 0; j < m.dim; ++j) flat.coef[j] += beta[i] * src.coef[j];
        flat.intercept() += beta[i] * src.intercept();
    }
    return flat;
}

netsim::OverheadLedger ledger_diff(const netsim::OverheadLedger& after,
                                   const netsim::OverheadLedger& before) {
    netsim::OverheadLedger d = after;
    for (int i = 0; i < netsim::kNumPhases; ++i) {
        d.phases[i].messages = after.phases[i].messages - before.phases[i].messages;
        d.phases[i].coefficients = after.phases[i].coefficients - before.phases[i].coefficients;
        d.phases[i].bytes = after.phases[i].bytes - before.phases[i].bytes;
    }
    d.non_model_payloads = after.non_model_payloads - before.non_model_payloads;
    return d;
}

}  // namespace

DynamicRunResult run_dynamic(const std::vector<data::LocalDataset>& stream,
                             const ProtocolConfig& cfg, const DynamicConfig& dyn,
                             netsim::Bus& bus) {
    if (stream.empty()) throw ConfigError("run_dynamic: empty arrival stream");
    if (dyn.batch_size < 1) throw ConfigError("run_dynamic: batch_size must be >= 1");
    if (!(dyn.alpha > 0.0 && dyn.alpha <= 1.0))
        throw ConfigError("run_dynamic: alpha must lie in (0,1]");
    const bool use_gtl = cfg.procedure == Procedure::dyn_gtl;
    const int total = int(stream.size());
    const int g_id = total;  // the permanent device
    if (bus.num_nodes() < total + 1)
        throw ProtocolError("run_dynamic: bus must include the permanent device");
    const int k = infer_classes(stream, cfg.num_classes);
    const std::size_t d = common_dim(stream);
    const unsigned threads = cfg.threads ? cfg.threads : default_threads();

    DynamicRunResult res;
    bool have_m = false;
    multiclass::OvaClassifier m;

    for (int start = 0, phase = 0; start < total; start += dyn.batch_size, ++phase) {
        const int end = std::min(start + dyn.batch_size, total);
        const int sb = end - start;
        netsim::OverheadLedger before = bus.ledger();

        DynamicPhaseResult ph;
        ph.phase = phase;
        for (int l = start; l < end; ++l) {
            ph.batch_locations.push_back(l);
            ph.batch_samples += stream[std::size_t(l)].size();
        }

        // Step 0 at the newcomers.
        std::vector<Node> batch(static_cast<std::size_t>(sb));
        parallel_for(std::size_t(sb), threads, [&](std::size_t i) {
            int l = start + int(i);
            batch[i].location_id = l;
            batch[i].h0 =
                train_local(stream[std::size_t(l)], k, cfg.svm, cfg.standardize,
                            derive_seed(cfg.seed, kSvmTag, std::uint64_t(l)), &batch[i].scaler);
        });

        multiclass::OvaClassifier m_new;  // this phase's aggregate m'
        if (use_gtl) {
            // G hands the stored aggregate to every newcomer; it joins their
            // source sets as one extra model per class.
            if (have_m) {
                for (int l = start; l < end; ++l)
                    for (int c = 0; c < k; ++c)
                        bus.send(g_id, l, netsim::Phase::dyn_g, m.models[std::size_t(c)]);
            }
            // Batch-internal step 1 (all-to-all within the batch).
            for (int i = 0; i < sb; ++i) {
                for (int j = 0; j < sb; ++j) {
                    if (i == j) continue;
                    for (int c = 0; c < k; ++c)
                        bus.send(start + i, start + j, netsim::Phase::step1,
                                 batch[std::size_t(i)].h0.models[std::size_t(c)]);
                }
            }
            const std::size_t L = std::size_t(sb) + (have_m ? 1 : 0);
            for (int i = 0; i < sb; ++i) {
                Node& node = batch[std::size_t(i)];
                node.sources_per_class.assign(std::size_t(k), learn::SourceSet(L));
                std::vector<netsim::ModelMessage> mail = bus.drain(start + i);
                std::map<int, int> seen;
                for (const auto& msg : mail) {
                    int c = seen[msg.src]++;
                    std::size_t slot = msg.src == g_id ? std::size_t(sb)
                                                       : std::size_t(msg.src - start);
                    node.sources_per_class[std::size_t(c)][slot] = msg.payload;
                }
                for (int c = 0; c < k; ++c)
                    node.sources_per_class[std::size_t(c)][std::size_t(i)] =
                        node.h0.models[std::size_t(c)];
            }

            // Step 2 + consensus inside the batch, then flatten to raw space.
            std::vector<std::pair<int, int>> tasks;
            for (int i = 0; i < sb; ++i)
                for (int c = 1; c <= k; ++c) tasks.emplace_back(i, c);
            for (int i = 0; i < sb; ++i)
                batch[std::size_t(i)].h2.models.assign(
                    std::size_t(k), LinearModel::zeros(d, L, ModelKind::gtl, space_id(d)));
            parallel_for(tasks.size(), threads, [&](std::size_t ti) {
                auto [i, c] = tasks[ti];
                int l = start + i;
                Node& node = batch[std::size_t(i)];
                learn::GreedyTLConfig per_class = cfg.gtl;
                per_class.seed = derive_seed(cfg.seed, kGtlTag, std::uint64_t(l), std::uint64_t(c));
                LinearModel mm = learn::greedy_tl(
                    stream[std::size_t(l)].samples, binarize(stream[std::size_t(l)].samples, c),
                    node.scaler, node.sources_per_class[std::size_t(c - 1)], per_class);
                mm.feature_space_id = space_id(d);
                node.h2.models[std::size_t(c - 1)] = mm;
            });
            for (int i = 0; i < sb; ++i) {
                for (int j = 0; j < sb; ++j) {
                    if (i == j) continue;
                    for (int c = 0; c < k; ++c)
                        bus.send(start + i, start + j, netsim::Phase::step3,
                                 batch[std::size_t(i)].h2.models[std::size_t(c)]);
                }
            }
            for (int i = 0; i < sb; ++i) bus.drain(start + i);

            std::vector<multiclass::OvaClassifier> h2s;
            for (int i = 0; i < sb; ++i) h2s.push_back(batch[std::size_t(i)].h2);
            multiclass::OvaClassifier agg = multiclass::consensus_mean(h2s);
            m_new.models.reserve(std::size_t(k));
            for (int c = 0; c < k; ++c)
                m_new.models.push_back(flatten_to_raw(agg.models[std::size_t(c)],
                                                      batch[0].sources_per_class[std::size_t(c)]));
            // The batch reports its new aggregate to G.
            for (int c = 0; c < k; ++c)
                bus.send(start, g_id, netsim::Phase::dyn_g, m_new.models[std::size_t(c)]);
            bus.drain(g_id);
        } else {
            // dyn_nohtl: G is the collector. Newcomers upload their models,
            // G merges and sends the updated aggregate back.
            for (int l = start; l < end; ++l)
                for (int c = 0; c < k; ++c)
                    bus.send(l, g_id, netsim::Phase::dyn_g,
                             batch[std::size_t(l - start)].h0.models[std::size_t(c)]);
            bus.drain(g_id);
            std::vector<multiclass::OvaClassifier> h0s;
            for (int i = 0; i < sb; ++i) h0s.push_back(batch[std::size_t(i)].h0);
            m_new = multiclass::consensus_mean(h0s);
        }

        // EMA merge on G.
        if (!have_m) {
            m = m_new;
            have_m = true;
        } else {
            for (int c = 0; c < k; ++c) {
                LinearModel& dst = m.models[std::size_t(c)];
                const LinearModel& src = m_new.models[std::size_t(c)];
                if (dst.coef.size() != src.coef.size())
                    throw DimensionError("run_dynamic: aggregate dimensionality changed");
                for (std::size_t j = 0; j < dst.coef.size(); ++j)
                    dst.coef[j] = dyn.alpha * dst.coef[j] + (1.0 - dyn.alpha) * src.coef[j];
            }
        }

        if (!use_gtl) {
            // Updated aggregate travels back to the batch.
            for (int l = start; l < end; ++l) {
                for (int c = 0; c < k; ++c)
                    bus.send(g_id, l, netsim::Phase::dyn_g, m.models[std::size_t(c)]);
                bus.drain(l);
            }
        }

        ph.aggregate = m;
        ph.ledger = ledger_diff(bus.ledger(), before);
        ph.ledger.protocol = use_gtl ? "dyn_gtl" : "dyn_nohtl";
        ph.ledger.s = sb;
        ph.ledger.k = k;
        ph.ledger.batch = sb;
        res.phases.push_back(std::move(ph));
    }

    res.final_aggregate = m;
    return res;
}

}  // namespace edgelearn::proto
