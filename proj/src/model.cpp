#include "edgelearn/model.hpp"

#include <cmath>

#include <json.hpp>

#include "edgelearn/common.hpp"
#include "edgelearn/kernels.hpp"

namespace edgelearn {

std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::base: return "base";
        case ModelKind::gtl: return "gtl";
        default: return "aggregate";
    }
}

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "base") return ModelKind::base;
    if (s == "gtl") return ModelKind::gtl;
    if (s == "aggregate") return ModelKind::aggregate;
    throw FormatError("unknown model kind: " + s);
}

LinearModel LinearModel::zeros(std::size_t dim, std::size_t num_sources, ModelKind kind,
                               std::string feature_space_id) {
    LinearModel m;
    m.dim = dim;
    m.num_sources = num_sources;
    m.kind = kind;
    m.feature_space_id = std::move(feature_space_id);
    m.coef.assign(dim + num_sources + 1, 0.0);
    return m;
}

double LinearModel::margin(const double* x, std::size_t n) const {
    if (n != dim) throw DimensionError("margin: feature vector length mismatch");
    if (num_sources != 0) throw DimensionError("margin: model expects source predictions");
    return kernels::dot(coef.data(), x, dim) + intercept();
}

double LinearModel::margin(const double* x, std::size_t n, const double* source_values,
                           std::size_t num_values) const {
    if (n != dim) throw DimensionError("margin: feature vector length mismatch");
    if (num_values != num_sources) throw DimensionError("margin: source value count mismatch");
    double m = kernels::dot(coef.data(), x, dim) + intercept();
    if (num_sources > 0) m += kernels::dot(coef.data() + dim, source_values, num_sources);
    return m;
}

std::size_t LinearModel::non_null_count(double eps_zero) const {
    std::size_t c = 0;
    for (double v : coef)
        if (std::abs(v) > eps_zero) ++c;
    return c;
}

bool LinearModel::all_finite() const {
    for (double v : coef)
        if (!std::isfinite(v)) return false;
    return true;
}

std::string to_json(const LinearModel& m, bool sparse) {
    nlohmann::json j;
    j["version"] = 1;
    j["feature_space_id"] = m.feature_space_id;
    j["kind"] = to_string(m.kind);
    j["dim"] = m.dim;
    j["num_sources"] = m.num_sources;
    j["source_clip"] = m.source_clip;
    j["degenerate"] = m.degenerate;
    if (sparse) {
        nlohmann::json entries = nlohmann::json::array();
        for (std::size_t i = 0; i < m.coef.size(); ++i) {
            if (m.coef[i] != 0.0) entries.push_back({i, m.coef[i]});
        }
        j["sparse"] = entries;
    } else {
        j["dense"] = m.coef;
    }
    return j.dump();
}

LinearModel model_from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("model record: ") + e.what());
    }
    if (!j.contains("version") || j["version"].get<int>() != 1)
        throw FormatError("model record: unsupported version");
    LinearModel m = LinearModel::zeros(j.at("dim").get<std::size_t>(),
                                       j.at("num_sources").get<std::size_t>(),
                                       model_kind_from_string(j.at("kind").get<std::string>()),
                                       j.at("feature_space_id").get<std::string>());
    m.source_clip = j.value("source_clip", 0.0);
    m.degenerate = j.value("degenerate", false);
    if (j.contains("dense")) {
        auto dense = j["dense"].get<std::vector<double>>();
        if (dense.size() != m.coef.size()) throw FormatError("model record: dense payload size mismatch");
        m.coef = std::move(dense);
    } else if (j.contains("sparse")) {
        for (const auto& e : j["sparse"]) {
            std::size_t idx = e.at(0).get<std::size_t>();
            if (idx >= m.coef.size()) throw FormatError("model record: sparse index out of range");
            m.coef[idx] = e.at(1).get<double>();
        }
    } else {
        throw FormatError("model record: missing payload");
    }
    return m;
}

}  // namespace edgelearn
