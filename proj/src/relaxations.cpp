#include "conicpf/relaxations.hpp"

#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

namespace conicpf {

namespace {

constexpr double kGuard = 1e-9;  // degrees

double deg(double rad) { return rad * 180.0 / std::numbers::pi; }

double angle_deg(cplx z) { return deg(std::arg(z)); }

// Strictly inside (lo, hi) with the guard band applied on both ends.
bool inside(double x, double lo, double hi) { return x > lo + kGuard && x < hi - kGuard; }

}  // namespace

M0Strategy parse_m0_strategy(std::string_view name) {
    if (name == "minus_susceptance") return M0Strategy::minus_susceptance;
    if (name == "unit_negative") return M0Strategy::unit_negative;
    if (name == "custom") return M0Strategy::custom;
    throw std::invalid_argument("unknown M0 strategy '" + std::string(name) + "'");
}

double normalize_degrees(double angle) {
    double a = std::fmod(angle, 360.0);
    if (a <= -180.0) a += 360.0;
    if (a > 180.0) a -= 360.0;
    return a;
}

ObjectiveDesign design_m0(const AdmittanceModel& model, const EdgeSet& edges, M0Strategy strategy) {
    if (strategy == M0Strategy::custom) throw std::invalid_argument("custom M0 needs an explicit matrix");
    const int n = model.n_bus;
    ObjectiveDesign d;
    d.strategy = strategy;
    d.edges = edges;
    std::vector<HermitianEntry> entries;
    std::set<std::pair<int, int>> seen;
    std::vector<double> diag(n, 0.0);
    for (int l : edges.branches) {
        int s = model.from[l], t = model.to[l];
        if (s > t) std::swap(s, t);
        if (!seen.emplace(s, t).second) continue;
        const double value = strategy == M0Strategy::minus_susceptance ? -model.ybus.coeff(s, t).imag() : -1.0;
        if (value == 0.0) d.warnings.push_back("edge " + std::to_string(l) + " has zero susceptance");
        entries.push_back({s, t, value});
        // diagonal: sum of |M0_st| over the incident edges of L'
        diag[s] += std::abs(value);
        diag[t] += std::abs(value);
    }
    for (int i = 0; i < n; ++i) entries.push_back({i, i, diag[i]});
    d.m0 = HermitianSparse::from_entries(n, std::move(entries));

    for (int l : edges.branches) {
        const double diff =
            normalize_degrees(angle_deg(d.m0.at(model.from[l], model.to[l])) - angle_deg(model.y_series[l]));
        if (!inside(diff, -180.0, 0.0)) {
            d.warnings.push_back("edge " + std::to_string(l) + " violates the M0 angle condition (" +
                                 std::to_string(diff) + " deg)");
        }
    }
    return d;
}

ObjectiveDesign design_m0(const AdmittanceModel& model, const EdgeSet& edges, const HermitianSparse& custom) {
    if (custom.dim() != model.n_bus) throw std::invalid_argument("custom M0 dimension mismatch");
    std::set<std::pair<int, int>> want;
    for (int l : edges.branches) {
        want.emplace(std::min(model.from[l], model.to[l]), std::max(model.from[l], model.to[l]));
    }
    const auto support = custom.off_diagonal_support();
    if (std::set<std::pair<int, int>>(support.begin(), support.end()) != want) {
        throw std::invalid_argument("custom M0 support does not match the edge set");
    }
    ObjectiveDesign d;
    d.strategy = M0Strategy::custom;
    d.edges = edges;
    d.m0 = custom;
    return d;
}

AssumptionReport check_assumption1(const ObjectiveDesign& design, const AdmittanceModel& model, const CVector& v,
                                   const EdgeSet& edges) {
    if (v.size() != model.n_bus) throw std::invalid_argument("voltage profile does not match the network");
    AssumptionReport report;
    report.pass = true;
    for (int l : edges.branches) {
        EdgeAssumption e;
        e.branch = l;
        e.s = model.from[l];
        e.t = model.to[l];
        if (std::abs(v[e.s]) == 0.0 || std::abs(v[e.t]) == 0.0) {
            throw std::invalid_argument("zero voltage magnitude at an endpoint of branch " + std::to_string(l));
        }
        const double ay = angle_deg(model.y_series[l]);
        const double am = angle_deg(design.m0.at(e.s, e.t));
        const double dv = angle_deg(v[e.s]) - angle_deg(v[e.t]);
        e.m0_minus_y = normalize_degrees(am - ay);
        e.v_minus_y = normalize_degrees(dv - ay);
        e.v_minus_m0 = normalize_degrees(dv - am);
        e.cond15 = inside(e.m0_minus_y, -180.0, 0.0);
        e.cond16a = inside(e.v_minus_y, 0.0, 180.0);
        e.cond16b = std::abs(e.v_minus_m0) > kGuard && std::abs(e.v_minus_m0) < 180.0 - kGuard;
        e.transformer = model.has_transformer(l);
        report.pass = report.pass && e.pass();
        report.edges.push_back(e);
    }
    return report;
}

RelaxationKind parse_relaxation(std::string_view name) {
    if (name == "pf_sdp") return RelaxationKind::pf_sdp;
    if (name == "pf_socp") return RelaxationKind::pf_socp;
    if (name == "psse_sdp") return RelaxationKind::psse_sdp;
    if (name == "psse_socp") return RelaxationKind::psse_socp;
    throw std::invalid_argument("unknown relaxation '" + std::string(name) + "'");
}

std::string to_string(RelaxationKind kind) {
    switch (kind) {
        case RelaxationKind::pf_sdp: return "pf_sdp";
        case RelaxationKind::pf_socp: return "pf_socp";
        case RelaxationKind::psse_sdp: return "psse_sdp";
        case RelaxationKind::psse_socp: return "psse_socp";
    }
    return "?";
}

Penalty parse_penalty(std::string_view text) {
    if (text == "wlav") return {DataFit::wlav, Regularizer::m0};
    if (text == "wls") return {DataFit::wls, Regularizer::m0};
    if (text == "nuclear") return {DataFit::wlav, Regularizer::nuclear};
    if (text == "none") return {DataFit::wlav, Regularizer::none};
    const auto plus = text.find('+');
    if (plus == std::string_view::npos) throw std::invalid_argument("unknown penalty '" + std::string(text) + "'");
    Penalty p;
    const auto fit = text.substr(0, plus);
    const auto reg = text.substr(plus + 1);
    if (fit == "wlav") p.fit = DataFit::wlav;
    else if (fit == "wls") p.fit = DataFit::wls;
    else throw std::invalid_argument("unknown data-fit term '" + std::string(fit) + "'");
    if (reg == "m0") p.regularizer = Regularizer::m0;
    else if (reg == "nuclear") p.regularizer = Regularizer::nuclear;
    else if (reg == "none") p.regularizer = Regularizer::none;
    else throw std::invalid_argument("unknown regularizer '" + std::string(reg) + "'");
    return p;
}

std::string to_string(const Penalty& penalty) {
    const std::string fit = penalty.fit == DataFit::wlav ? "wlav" : "wls";
    switch (penalty.regularizer) {
        case Regularizer::m0: return fit + "+m0";
        case Regularizer::nuclear: return fit + "+nuclear";
        case Regularizer::none: return fit + "+none";
    }
    return fit;
}

bool is_pf(RelaxationKind kind) { return kind == RelaxationKind::pf_sdp || kind == RelaxationKind::pf_socp; }
bool is_socp(RelaxationKind kind) { return kind == RelaxationKind::pf_socp || kind == RelaxationKind::psse_socp; }

ConicProgram assemble(RelaxationKind kind, const ObjectiveDesign& design, const MeasurementSet& measurements,
                      double rho, Penalty penalty) {
    const int n = measurements.n_bus;
    if (design.m0.dim() != n) throw std::invalid_argument("objective design does not match the measurement set");
    if (measurements.records.empty()) throw std::invalid_argument("empty measurement set");
    ConicProgram p;
    p.dimension = n;
    const bool pf = is_pf(kind);
    if (pf) {
        p.objective = design.m0;
    } else {
        if (!(rho > 0.0)) throw std::invalid_argument("state estimation needs rho > 0");
        p.penalty = penalty.fit == DataFit::wlav ? SlackPenalty::wlav : SlackPenalty::wls;
        p.rho = rho;
        switch (penalty.regularizer) {
            case Regularizer::m0: p.objective = design.m0; break;
            case Regularizer::nuclear: {
                std::vector<HermitianEntry> id;
                for (int k = 0; k < n; ++k) id.push_back({k, k, 1.0});
                p.objective = HermitianSparse::from_entries(n, std::move(id));
                break;
            }
            case Regularizer::none: p.objective = HermitianSparse(n); break;
        }
    }
    for (const auto& r : measurements.records) {
        ConicConstraint c;
        c.matrix = r.coeff.matrix;
        c.rhs = r.observed;
        c.slack = !pf;
        c.sigma = r.sigma;
        c.label = std::string(to_string(r.coeff.descriptor.kind)) + ":" + std::to_string(r.coeff.descriptor.index);
        p.constraints.push_back(std::move(c));
    }
    if (is_socp(kind)) {
        p.cone = ConeMode::two_by_two;
        p.edges = p.sparsity_edges();
    }
    p.validate();
    return p;
}

}  // namespace conicpf
