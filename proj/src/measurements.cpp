#include "conicpf/measurements.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>
#include <stdexcept>

namespace conicpf {

std::string_view to_string(MeasurementKind kind) {
    switch (kind) {
        case MeasurementKind::voltage_sq: return "voltage_sq";
        case MeasurementKind::p_inj: return "p_inj";
        case MeasurementKind::q_inj: return "q_inj";
        case MeasurementKind::p_from: return "p_from";
        case MeasurementKind::p_to: return "p_to";
        case MeasurementKind::q_from: return "q_from";
        case MeasurementKind::q_to: return "q_to";
    }
    return "?";
}

MeasurementKind parse_measurement_kind(std::string_view name) {
    for (auto k : {MeasurementKind::voltage_sq, MeasurementKind::p_inj, MeasurementKind::q_inj,
                   MeasurementKind::p_from, MeasurementKind::p_to, MeasurementKind::q_from, MeasurementKind::q_to}) {
        if (to_string(k) == name) return k;
    }
    throw std::invalid_argument("unknown measurement kind '" + std::string(name) + "'");
}

bool is_branch_kind(MeasurementKind kind) {
    return kind == MeasurementKind::p_from || kind == MeasurementKind::p_to || kind == MeasurementKind::q_from ||
           kind == MeasurementKind::q_to;
}

namespace {

// Row `row` of a row-major sparse matrix as (column, value) pairs.
std::vector<std::pair<int, cplx>> sparse_row(const AdmittanceModel::SpMat& m, int row) {
    std::vector<std::pair<int, cplx>> out;
    for (AdmittanceModel::SpMat::InnerIterator it(m, row); it; ++it) {
        out.emplace_back(static_cast<int>(it.col()), it.value());
    }
    return out;
}

// (1/2)(Y* d e_i^T + e_i d^T Y) for active power, (j/2)(e_i d^T Y - Y* d e_i^T) for reactive,
// where d^T Y is the given row.
HermitianSparse injection_pattern(int n, int bus, const std::vector<std::pair<int, cplx>>& row, bool reactive) {
    HermitianSparse m(n);
    const cplx scale = reactive ? cplx(0.0, 0.5) : cplx(0.5, 0.0);
    for (const auto& [col, y] : row) {
        if (col == bus) {
            // diagonal: (1/2)(y + conj y) = Re y, or (j/2)(y - conj y) = -Im y
            m.add(bus, bus, reactive ? -y.imag() : y.real());
        } else {
            m.add(bus, col, scale * y);
        }
    }
    return m;
}

}  // namespace

CoefficientMatrix build_matrix(const AdmittanceModel& model, MeasurementDescriptor d) {
    const int n = model.n_bus;
    CoefficientMatrix out{d, HermitianSparse(n)};
    if (is_branch_kind(d.kind)) {
        if (d.index < 0 || d.index >= model.branch_count()) {
            throw std::out_of_range("branch index out of range in measurement descriptor");
        }
        const bool from_end = d.kind == MeasurementKind::p_from || d.kind == MeasurementKind::q_from;
        const bool reactive = d.kind == MeasurementKind::q_from || d.kind == MeasurementKind::q_to;
        const int bus = from_end ? model.from[d.index] : model.to[d.index];
        out.matrix = injection_pattern(n, bus, sparse_row(from_end ? model.yf : model.yt, d.index), reactive);
        return out;
    }
    if (d.index < 0 || d.index >= n) throw std::out_of_range("bus index out of range in measurement descriptor");
    switch (d.kind) {
        case MeasurementKind::voltage_sq:
            out.matrix.add(d.index, d.index, 1.0);
            break;
        case MeasurementKind::p_inj:
        case MeasurementKind::q_inj:
            out.matrix = injection_pattern(n, d.index, sparse_row(model.ybus, d.index),
                                           d.kind == MeasurementKind::q_inj);
            break;
        default:
            throw std::invalid_argument("unknown measurement kind");
    }
    return out;
}

double evaluate(const CoefficientMatrix& m, const CVector& v) {
    if (v.size() != m.matrix.dim()) throw std::invalid_argument("voltage dimension mismatch");
    return m.matrix.quadratic_form(v);
}

int MeasurementSet::find(MeasurementDescriptor d) const {
    for (int j = 0; j < size(); ++j) {
        if (records[j].coeff.descriptor == d) return j;
    }
    return -1;
}

std::uint64_t MeasurementSet::fingerprint() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* data, std::size_t len) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    };
    for (const auto& r : records) {
        int kind = static_cast<int>(r.coeff.descriptor.kind);
        mix(&kind, sizeof kind);
        mix(&r.coeff.descriptor.index, sizeof(int));
        mix(&r.observed, sizeof(double));
        mix(&r.sigma, sizeof(double));
    }
    return h;
}

std::vector<MeasurementDescriptor> MeasurementPlan::expand(int n_bus) const {
    std::vector<MeasurementDescriptor> out;
    if (voltage_all) {
        for (int k = 0; k < n_bus; ++k) out.push_back({MeasurementKind::voltage_sq, k});
    }
    if (tree_flows) {
        for (int l : tree_flows->branches) out.push_back({tree_flow_kind, l});
    }
    out.insert(out.end(), extra.begin(), extra.end());
    return out;
}

double KindMultipliers::for_kind(MeasurementKind kind) const {
    if (kind == MeasurementKind::voltage_sq) return voltage;
    if (is_branch_kind(kind)) return branch;
    return nodal;
}

void NoiseConfig::validate() const {
    if (!(level >= 0.0)) throw std::invalid_argument("noise level must be nonnegative");
    if (!(sigma_floor > 0.0)) throw std::invalid_argument("sigma floor must be positive");
    if (bad_data.fraction < 0.0 || bad_data.fraction > 1.0) {
        throw std::invalid_argument("bad-data fraction must lie in [0,1]");
    }
    if (bad_data.mode == BadDataMode::uniform && bad_data.hi < bad_data.lo) {
        throw std::invalid_argument("bad-data uniform interval is empty");
    }
}

MeasurementSet sample_measurements(const AdmittanceModel& model, const CVector& v_true, const MeasurementPlan& plan,
                                   const NoiseConfig& noise) {
    noise.validate();
    if (v_true.size() != model.n_bus) throw std::invalid_argument("voltage profile does not match the network");
    const auto descriptors = plan.expand(model.n_bus);
    if (descriptors.empty()) throw std::invalid_argument("measurement plan is empty");

    std::mt19937_64 rng(noise.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    MeasurementSet set;
    set.n_bus = model.n_bus;
    set.records.reserve(descriptors.size());
    for (const auto& d : descriptors) {
        MeasurementRecord r;
        r.coeff = build_matrix(model, d);
        r.true_value = evaluate(r.coeff, v_true);
        const double mult = noise.multipliers.for_kind(d.kind);
        const double base = noise.proportional ? mult * noise.level * std::abs(r.true_value) : mult * noise.level;
        r.sigma = std::max(base, noise.sigma_floor);
        r.noise = noise.level > 0.0 ? r.sigma * gauss(rng) : 0.0;
        r.observed = r.true_value + r.noise;
        set.records.push_back(std::move(r));
    }

    const auto& bad = noise.bad_data;
    if (bad.mode != BadDataMode::none && bad.fraction > 0.0) {
        std::vector<int> eligible;
        for (int j = 0; j < set.size(); ++j) {
            if (!bad.flows_only || is_branch_kind(set.records[j].coeff.descriptor.kind)) eligible.push_back(j);
        }
        const auto count = static_cast<std::size_t>(std::llround(bad.fraction * static_cast<double>(eligible.size())));
        // partial Fisher-Yates with explicit draws so the selection is independent of std::shuffle
        for (std::size_t i = 0; i < count && i < eligible.size(); ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, eligible.size() - 1);
            std::swap(eligible[i], eligible[pick(rng)]);
        }
        eligible.resize(std::min(count, eligible.size()));
        std::sort(eligible.begin(), eligible.end());
        std::uniform_real_distribution<double> uni(bad.lo, bad.hi);
        for (int j : eligible) {
            auto& r = set.records[j];
            const double outlier = bad.mode == BadDataMode::gaussian ? bad.stddev * gauss(rng) : uni(rng);
            r.noise += outlier;
            r.observed = r.true_value + r.noise;
            r.bad_data = true;
        }
    }
    return set;
}

nlohmann::json to_json(const MeasurementSet& set) {
    nlohmann::json doc;
    doc["n_bus"] = set.n_bus;
    doc["records"] = nlohmann::json::array();
    for (const auto& r : set.records) {
        doc["records"].push_back({{"kind", std::string(to_string(r.coeff.descriptor.kind))},
                                  {"index", r.coeff.descriptor.index},
                                  {"true", r.true_value},
                                  {"z", r.observed},
                                  {"sigma", r.sigma},
                                  {"eta", r.noise},
                                  {"bad_data", r.bad_data}});
    }
    return doc;
}

MeasurementSet measurement_set_from_json(const nlohmann::json& doc, const AdmittanceModel& model) {
    MeasurementSet set;
    set.n_bus = doc.at("n_bus").get<int>();
    if (set.n_bus != model.n_bus) throw std::invalid_argument("measurement set does not match the network");
    for (const auto& jr : doc.at("records")) {
        MeasurementRecord r;
        MeasurementDescriptor d{parse_measurement_kind(jr.at("kind").get<std::string>()), jr.at("index").get<int>()};
        r.coeff = build_matrix(model, d);
        r.true_value = jr.at("true").get<double>();
        r.observed = jr.at("z").get<double>();
        r.sigma = jr.at("sigma").get<double>();
        r.noise = jr.at("eta").get<double>();
        r.bad_data = jr.value("bad_data", false);
        if (!(r.sigma > 0.0)) throw std::invalid_argument("measurement sigma must be positive");
        set.records.push_back(std::move(r));
    }
    return set;
}

}  // namespace conicpf
