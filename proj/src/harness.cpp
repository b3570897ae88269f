#include "conicpf/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "conicpf/baseline.hpp"
#include "conicpf/certificates.hpp"
#include "conicpf/conic.hpp"
#include "conicpf/recovery.hpp"

namespace conicpf {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------- cases

std::optional<NetworkCase> builtin_case(const std::string& name) {
    const double deg = std::numbers::pi / 180.0;
    auto bus = [](int id, BusKind kind, double vm, double va) {
        BusRecord b;
        b.id = id;
        b.kind = kind;
        b.vm = vm;
        b.va = va;
        b.gen_vm = vm;
        b.has_gen = kind != BusKind::pq;
        return b;
    };
    auto line = [](int from, int to, double r, double x) {
        BranchRecord e;
        e.from = from;
        e.to = to;
        e.r = r;
        e.x = x;
        return e;
    };
    NetworkCase net;
    if (name == "tb2") {
        net.buses = {bus(1, BusKind::slack, 1.0, 0.0), bus(2, BusKind::pq, 1.0, -10.0 * deg)};
        net.branches = {line(1, 2, 0.0, 0.2)};
    } else if (name == "tb3") {
        net.buses = {bus(1, BusKind::slack, 1.0, 0.0), bus(2, BusKind::pq, 0.98, -8.0 * deg),
                     bus(3, BusKind::pq, 1.01, -15.0 * deg)};
        net.branches = {line(1, 2, 0.02, 0.2), line(2, 3, 0.03, 0.25)};
    } else {
        return std::nullopt;
    }
    validate_case(net);
    return net;
}

NetworkCase resolve_case(const std::string& name, const std::vector<fs::path>& search_dirs) {
    if (name.empty()) throw ConfigError("no case given");
    if (auto b = builtin_case(name)) return *b;
    std::vector<fs::path> candidates{name};
    for (const auto& dir : search_dirs) {
        candidates.push_back(dir / name);
        candidates.push_back(dir / (name + ".m"));
        candidates.push_back(dir / (name + ".json"));
    }
    for (const auto& p : candidates) {
        std::error_code ec;
        if (fs::is_regular_file(p, ec)) return load_case(p);
    }
    throw ConfigError("case '" + name + "' not found");
}

// ---------------------------------------------------------------- estimators

namespace {

std::string format_number(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

}  // namespace

std::string EstimatorSpec::name() const {
    if (gauss_newton) return "gauss_newton";
    std::string out = to_string(kind);
    if (is_pf(kind)) return out;
    out += ":" + to_string(penalty) + ":";
    if (rho.kind == RhoPolicy::Kind::rho_min) {
        out += rho.value == 1.0 ? "rho_min" : format_number(rho.value) + "*rho_min";
    } else {
        out += format_number(rho.value);
    }
    return out;
}

EstimatorSpec parse_estimator(const std::string& text) {
    EstimatorSpec spec;
    if (text == "gauss_newton" || text == "gn") {
        spec.gauss_newton = true;
        return spec;
    }
    std::vector<std::string> parts;
    std::stringstream in(text);
    for (std::string part; std::getline(in, part, ':');) parts.push_back(part);
    if (parts.empty() || parts.size() > 3) throw ConfigError("bad estimator '" + text + "'");
    try {
        spec.kind = parse_relaxation(parts[0]);
        if (parts.size() > 1) spec.penalty = parse_penalty(parts[1]);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (parts.size() > 2) {
        const std::string& r = parts[2];
        const auto star = r.find('*');
        if (r == "rho_min") {
            spec.rho = {RhoPolicy::Kind::rho_min, 1.0};
        } else if (star != std::string::npos && r.substr(star + 1) == "rho_min") {
            spec.rho = {RhoPolicy::Kind::rho_min, std::stod(r.substr(0, star))};
        } else {
            try {
                spec.rho = {RhoPolicy::Kind::fixed, std::stod(r)};
            } catch (const std::exception&) {
                throw ConfigError("bad rho '" + r + "'");
            }
        }
    }
    return spec;
}

// ---------------------------------------------------------------- config

void ExperimentConfig::validate() const {
    if (case_name.empty()) throw ConfigError("no case given");
    if (trials < 1) throw ConfigError("trial count must be at least 1");
    if (estimators.empty()) throw ConfigError("no estimators given");
    for (const auto& e : estimators) {
        if (!e.gauss_newton && !is_pf(e.kind) && !(e.rho.value > 0.0)) {
            throw ConfigError("estimator " + e.name() + " needs a positive rho");
        }
    }
    if (tree == TreeStrategy::explicit_list) throw ConfigError("explicit edge lists are not supported by the harness");
    if (!(plan.injection_fraction >= 0.0 && plan.injection_fraction <= 1.0)) {
        throw ConfigError("injection fraction must lie in [0, 1]");
    }
    for (double f : sweep_fractions) {
        if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("sweep fractions must lie in [0, 1]");
    }
    if (!(solver.tol > 0.0) || solver.max_iterations < 1) throw ConfigError("bad solver limits");
    try {
        noise.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

namespace {

const char* op_name(OperatingPointSource s) {
    switch (s) {
        case OperatingPointSource::stored: return "stored";
        case OperatingPointSource::solve: return "solve";
        case OperatingPointSource::automatic: return "automatic";
    }
    return "?";
}

const char* tree_name(TreeStrategy t) {
    switch (t) {
        case TreeStrategy::min_weight_tree: return "min_weight_tree";
        case TreeStrategy::full_graph: return "full_graph";
        case TreeStrategy::explicit_list: return "explicit_list";
    }
    return "?";
}

const char* m0_name(M0Strategy m) {
    switch (m) {
        case M0Strategy::minus_susceptance: return "minus_susceptance";
        case M0Strategy::unit_negative: return "unit_negative";
        case M0Strategy::custom: return "custom";
    }
    return "?";
}

const char* bad_name(BadDataMode m) {
    switch (m) {
        case BadDataMode::none: return "none";
        case BadDataMode::gaussian: return "gaussian";
        case BadDataMode::uniform: return "uniform";
    }
    return "?";
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, value] : obj.items()) {
        if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end()) {
            throw ConfigError("unknown key '" + key + "' in " + where);
        }
    }
}

template <class T>
void read(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

EstimatorSpec estimator_from_json(const json& e) {
    if (e.is_string()) return parse_estimator(e.get<std::string>());
    check_keys(e, {"relaxation", "penalty", "rho", "rho_scale"}, "estimator");
    std::string text = e.value("relaxation", "psse_sdp");
    if (text == "gauss_newton") return parse_estimator(text);
    EstimatorSpec spec = parse_estimator(text + ":" + e.value("penalty", "wlav"));
    if (e.contains("rho")) {
        const auto& r = e.at("rho");
        if (r.is_string()) {
            if (r.get<std::string>() != "rho_min") throw ConfigError("rho must be a number or \"rho_min\"");
            spec.rho = {RhoPolicy::Kind::rho_min, e.value("rho_scale", 1.0)};
        } else {
            spec.rho = {RhoPolicy::Kind::fixed, r.get<double>()};
        }
    }
    return spec;
}

}  // namespace

ExperimentConfig config_from_json(const json& doc) {
    ExperimentConfig c;
    try {
        check_keys(doc, {"case", "search_dirs", "operating_point", "tree", "plan", "noise", "m0", "estimators",
                         "trials", "seed", "decompose", "parallel_trials", "stress", "solver", "sweep_fractions",
                         "out_dir"},
                   "config");
        read(doc, "case", c.case_name);
        if (doc.contains("search_dirs")) {
            for (const auto& d : doc.at("search_dirs")) c.search_dirs.emplace_back(d.get<std::string>());
        }
        if (doc.contains("operating_point")) {
            const auto s = doc.at("operating_point").get<std::string>();
            if (s == "stored") c.operating_point = OperatingPointSource::stored;
            else if (s == "solve") c.operating_point = OperatingPointSource::solve;
            else if (s == "automatic") c.operating_point = OperatingPointSource::automatic;
            else throw ConfigError("unknown operating point source '" + s + "'");
        }
        if (doc.contains("tree")) c.tree = parse_tree_strategy(doc.at("tree").get<std::string>());
        if (doc.contains("plan")) {
            const auto& p = doc.at("plan");
            check_keys(p, {"voltages", "flow_ends", "injection_fraction", "injection_reactive"}, "plan");
            if (p.contains("voltages")) {
                const auto s = p.at("voltages").get<std::string>();
                if (s != "all" && s != "pq_ref") throw ConfigError("plan.voltages must be \"all\" or \"pq_ref\"");
                c.plan.voltage_all = s == "all";
            }
            if (p.contains("flow_ends")) {
                const auto s = p.at("flow_ends").get<std::string>();
                if (s != "from" && s != "both") throw ConfigError("plan.flow_ends must be \"from\" or \"both\"");
                c.plan.both_ends = s == "both";
            }
            read(p, "injection_fraction", c.plan.injection_fraction);
            read(p, "injection_reactive", c.plan.injection_reactive);
        }
        if (doc.contains("noise")) {
            const auto& n = doc.at("noise");
            check_keys(n, {"level", "proportional", "multipliers", "sigma_floor", "bad_data"}, "noise");
            read(n, "level", c.noise.level);
            read(n, "proportional", c.noise.proportional);
            read(n, "sigma_floor", c.noise.sigma_floor);
            if (n.contains("multipliers")) {
                const auto& m = n.at("multipliers");
                check_keys(m, {"voltage", "nodal", "branch"}, "noise.multipliers");
                read(m, "voltage", c.noise.multipliers.voltage);
                read(m, "nodal", c.noise.multipliers.nodal);
                read(m, "branch", c.noise.multipliers.branch);
            }
            if (n.contains("bad_data")) {
                const auto& b = n.at("bad_data");
                check_keys(b, {"mode", "fraction", "stddev", "lo", "hi", "flows_only"}, "noise.bad_data");
                auto& bd = c.noise.bad_data;
                if (b.contains("mode")) {
                    const auto s = b.at("mode").get<std::string>();
                    if (s == "none") bd.mode = BadDataMode::none;
                    else if (s == "gaussian") bd.mode = BadDataMode::gaussian;
                    else if (s == "uniform") bd.mode = BadDataMode::uniform;
                    else throw ConfigError("unknown bad data mode '" + s + "'");
                }
                read(b, "fraction", bd.fraction);
                read(b, "stddev", bd.stddev);
                read(b, "lo", bd.lo);
                read(b, "hi", bd.hi);
                read(b, "flows_only", bd.flows_only);
            }
        }
        if (doc.contains("m0")) c.m0 = parse_m0_strategy(doc.at("m0").get<std::string>());
        if (doc.contains("estimators")) {
            for (const auto& e : doc.at("estimators")) c.estimators.push_back(estimator_from_json(e));
        }
        read(doc, "trials", c.trials);
        read(doc, "seed", c.seed);
        read(doc, "decompose", c.decompose);
        read(doc, "parallel_trials", c.parallel_trials);
        read(doc, "stress", c.stress);
        if (doc.contains("solver")) {
            const auto& s = doc.at("solver");
            check_keys(s, {"tol", "max_iterations", "parallel"}, "solver");
            read(s, "tol", c.solver.tol);
            read(s, "max_iterations", c.solver.max_iterations);
            if (s.contains("parallel")) {
                c.solver.policy = s.at("parallel").get<bool>() ? ExecPolicy::parallel : ExecPolicy::serial;
            }
        }
        read(doc, "sweep_fractions", c.sweep_fractions);
        if (doc.contains("out_dir")) c.out_dir = doc.at("out_dir").get<std::string>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

json to_json(const ExperimentConfig& c) {
    json est = json::array();
    for (const auto& e : c.estimators) est.push_back(e.name());
    json dirs = json::array();
    for (const auto& d : c.search_dirs) dirs.push_back(d.string());
    const auto& bd = c.noise.bad_data;
    return {
        {"case", c.case_name},
        {"search_dirs", dirs},
        {"operating_point", op_name(c.operating_point)},
        {"tree", tree_name(c.tree)},
        {"plan",
         {{"voltages", c.plan.voltage_all ? "all" : "pq_ref"},
          {"flow_ends", c.plan.both_ends ? "both" : "from"},
          {"injection_fraction", c.plan.injection_fraction},
          {"injection_reactive", c.plan.injection_reactive}}},
        {"noise",
         {{"level", c.noise.level},
          {"proportional", c.noise.proportional},
          {"sigma_floor", c.noise.sigma_floor},
          {"multipliers",
           {{"voltage", c.noise.multipliers.voltage},
            {"nodal", c.noise.multipliers.nodal},
            {"branch", c.noise.multipliers.branch}}},
          {"bad_data",
           {{"mode", bad_name(bd.mode)},
            {"fraction", bd.fraction},
            {"stddev", bd.stddev},
            {"lo", bd.lo},
            {"hi", bd.hi},
            {"flows_only", bd.flows_only}}}}},
        {"m0", m0_name(c.m0)},
        {"estimators", est},
        {"trials", c.trials},
        {"seed", c.seed},
        {"decompose", c.decompose},
        {"parallel_trials", c.parallel_trials},
        {"stress", c.stress},
        {"solver",
         {{"tol", c.solver.tol},
          {"max_iterations", c.solver.max_iterations},
          {"parallel", c.solver.policy == ExecPolicy::parallel}}},
        {"sweep_fractions", c.sweep_fractions},
        {"out_dir", c.out_dir.string()},
    };
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    return config_from_json(doc);
}

// ---------------------------------------------------------------- report

const std::vector<std::string>& report_columns() {
    static const std::vector<std::string> cols{"xi", "zeta", "zeta_max", "beta", "lambda", "f_wlav", "rho", "rho_min"};
    return cols;
}

namespace {

std::optional<double> column(const TrialRow& r, const std::string& name) {
    if (name == "xi") return r.xi;
    if (name == "zeta") return r.zeta;
    if (name == "zeta_max") return r.zeta_max;
    if (name == "beta") return r.beta;
    if (name == "lambda") return r.lambda;
    if (name == "f_wlav") return r.f_wlav;
    if (name == "rho") return r.rho;
    if (name == "rho_min") return r.rho_min;
    return std::nullopt;
}

std::string hex(std::uint64_t x) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
    return buf;
}

std::string cell(const std::optional<double>& x) { return x ? format_number(*x) : std::string(); }

double median(std::vector<double> x) {
    std::sort(x.begin(), x.end());
    const std::size_t n = x.size();
    return n % 2 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
}

std::vector<std::string> estimator_order(const std::vector<TrialRow>& rows) {
    std::vector<std::string> names;
    for (const auto& r : rows) {
        if (std::find(names.begin(), names.end(), r.estimator) == names.end()) names.push_back(r.estimator);
    }
    return names;
}

void aggregate(EstimationReport& report) {
    report.aggregates.clear();
    report.failures = 0;
    for (const auto& r : report.rows) report.failures += r.failed;
    for (const auto& name : estimator_order(report.rows)) {
        for (const auto& col : report_columns()) {
            std::vector<double> values;
            for (const auto& r : report.rows) {
                if (r.estimator != name) continue;
                if (auto v = column(r, col)) values.push_back(*v);
            }
            Aggregate a;
            a.estimator = name;
            a.column = col;
            a.count = static_cast<int>(values.size());
            if (!values.empty()) {
                a.median = median(values);
                double sum = 0.0;
                for (double v : values) sum += v;
                a.mean = sum / values.size();
                a.max = *std::max_element(values.begin(), values.end());
            }
            report.aggregates.push_back(a);
        }
    }
}

}  // namespace

std::string EstimationReport::trials_csv() const {
    std::ostringstream out;
    out << "trial,seed,estimator,fingerprint,measurements";
    for (const auto& c : report_columns()) out << ',' << c;
    out << ",status,iterations,wall_s\n";
    for (const auto& r : rows) {
        out << r.trial << ',' << r.seed << ',' << r.estimator << ',' << hex(r.fingerprint) << ',' << r.measurements;
        for (const auto& c : report_columns()) out << ',' << cell(column(r, c));
        out << ',' << r.status << ',' << r.iterations << ',' << format_number(r.wall_seconds) << '\n';
    }
    return out.str();
}

std::string EstimationReport::summary_csv() const {
    std::ostringstream out;
    out << "estimator,statistic";
    for (const auto& c : report_columns()) out << ',' << c;
    out << '\n';
    for (const auto& name : estimator_order(rows)) {
        for (const char* stat : {"median", "mean", "max"}) {
            out << name << ',' << stat;
            for (const auto& c : report_columns()) {
                const Aggregate* a = find(name, c);
                out << ',';
                if (a && a->count > 0) {
                    const std::string s = stat;
                    out << format_number(s == "median" ? a->median : s == "mean" ? a->mean : a->max);
                }
            }
            out << '\n';
        }
    }
    return out.str();
}

const Aggregate* EstimationReport::find(const std::string& estimator, const std::string& col) const {
    for (const auto& a : aggregates) {
        if (a.estimator == estimator && a.column == col) return &a;
    }
    return nullptr;
}

json EstimationReport::to_json() const {
    auto opt = [](const std::optional<double>& x) { return x ? json(*x) : json(nullptr); };
    json trials = json::array();
    for (const auto& r : rows) {
        json row = {{"trial", r.trial},           {"seed", r.seed},
                    {"estimator", r.estimator},   {"fingerprint", hex(r.fingerprint)},
                    {"measurements", r.measurements}, {"status", r.status},
                    {"iterations", r.iterations}, {"wall_s", r.wall_seconds},
                    {"failed", r.failed},         {"message", r.message}};
        for (const auto& c : report_columns()) row[c] = opt(column(r, c));
        trials.push_back(std::move(row));
    }
    json agg = json::array();
    for (const auto& a : aggregates) {
        agg.push_back({{"estimator", a.estimator},
                       {"column", a.column},
                       {"count", a.count},
                       {"median", a.median},
                       {"mean", a.mean},
                       {"max", a.max}});
    }
    return {{"trials", trials}, {"aggregates", agg}, {"failures", failures}};
}

void write_report(const EstimationReport& report, const ExperimentConfig& config, const fs::path& dir) {
    fs::create_directories(dir);
    auto put = [&](const char* name, const std::string& text) {
        std::ofstream out(dir / name);
        if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
        out << text;
    };
    put("trials.csv", report.trials_csv());
    put("summary.csv", report.summary_csv());
    json doc = report.to_json();
    doc["config"] = to_json(config);
    put("report.json", doc.dump(2) + "\n");
}

// ---------------------------------------------------------------- experiment

namespace {

// beta and zeta over the stored pattern of X (diagonal plus covered edges); with a
// full X this is the usual definition
ZetaResult masked_zeta(const HermitianSparse& x, const CVector& v) {
    double num = 0.0, den = 0.0, trace = 0.0;
    for (const auto& e : x.entries()) {
        const double w = e.row == e.col ? 1.0 : 2.0;
        const cplx t = v[e.row] * std::conj(v[e.col]);
        num += w * (std::conj(t) * e.value).real();
        den += w * std::norm(t);
        if (e.row == e.col) trace += e.value.real();
    }
    ZetaResult z;
    z.beta = den > 0.0 ? num / den : 0.0;
    double r2 = 0.0;
    for (const auto& e : x.entries()) {
        const double w = e.row == e.col ? 1.0 : 2.0;
        r2 += w * std::norm(e.value - z.beta * v[e.row] * std::conj(v[e.col]));
    }
    const double n = v.size();
    z.zeta = trace > 0.0 ? std::sqrt(r2) / std::sqrt(n * trace) : 0.0;
    return z;
}

struct Setup {
    NetworkCase net;
    AdmittanceModel model;
    CVector v;
    int ref = 0;
    EdgeSet edges;
    ObjectiveDesign design;
    std::optional<DualCertificate> cert;
    std::string cert_note;
};

Setup prepare(const ExperimentConfig& config) {
    config.validate();
    Setup s;
    try {
        s.net = resolve_case(config.case_name, config.search_dirs);
    } catch (const CaseError& e) {
        throw ConfigError(std::string("case: ") + e.what());
    }
    if (s.net.bus_count() > 300 && !config.stress) {
        throw ConfigError("case has " + std::to_string(s.net.bus_count()) + " buses; large cases need --stress");
    }
    s.model = build_admittance(s.net);
    s.v = operating_point(s.net, s.model, config.operating_point);
    s.ref = s.net.slack_index();
    s.edges = spanning_subgraph(s.net, s.model, config.tree);
    s.design = design_m0(s.model, s.edges, config.m0);
    if (config.plan.voltage_all && is_acyclic(s.net, s.edges)) {
        try {
            DualCertificate cert = build_certificate(s.v, s.design, s.edges, s.model);
            if (verify_certificate(cert, s.v).valid()) s.cert = std::move(cert);
            else s.cert_note = "certificate failed verification";
        } catch (const std::exception& e) {
            s.cert_note = e.what();
        }
    } else {
        s.cert_note = "certificate needs every voltage and flows on a tree";
    }
    for (const auto& e : config.estimators) {
        if (!e.gauss_newton && e.rho.kind == RhoPolicy::Kind::rho_min && !is_pf(e.kind) && !s.cert) {
            throw ConfigError("rho_min policy without a certificate: " + s.cert_note);
        }
    }
    return s;
}

MeasurementPlan trial_plan(const ExperimentConfig& config, const Setup& s, std::uint64_t seed) {
    MeasurementPlan plan;
    const int n = s.net.bus_count();
    plan.voltage_all = config.plan.voltage_all;
    plan.tree_flows = s.edges;
    if (!config.plan.voltage_all) {
        for (int k = 0; k < n; ++k) {
            if (s.net.buses[k].kind != BusKind::pv) plan.extra.push_back({MeasurementKind::voltage_sq, k});
        }
    }
    if (config.plan.both_ends) {
        for (int l : s.edges.branches) plan.extra.push_back({MeasurementKind::p_to, l});
    }
    const int count = static_cast<int>(std::lround(config.plan.injection_fraction * n));
    if (count > 0) {
        std::vector<int> buses(n);
        for (int k = 0; k < n; ++k) buses[k] = k;
        std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
        std::shuffle(buses.begin(), buses.end(), rng);
        buses.resize(count);
        std::sort(buses.begin(), buses.end());
        for (int k : buses) plan.extra.push_back({MeasurementKind::p_inj, k});
        if (config.plan.injection_reactive) {
            for (int k : buses) plan.extra.push_back({MeasurementKind::q_inj, k});
        }
    }
    return plan;
}

MeasurementSet trial_measurements(const ExperimentConfig& config, const Setup& s, std::uint64_t seed) {
    NoiseConfig noise = config.noise;
    noise.seed = seed;
    return sample_measurements(s.model, s.v, trial_plan(config, s, seed), noise);
}

TrialRow run_estimator(const ExperimentConfig& config, const Setup& s, const EstimatorSpec& spec,
                       const MeasurementSet& ms) {
    TrialRow row;
    row.estimator = spec.name();
    row.fingerprint = ms.fingerprint();
    row.measurements = ms.size();
    double f = 0.0;
    for (const auto& r : ms.records) f += std::abs(r.noise) / r.sigma;
    row.f_wlav = f;
    if (s.cert) {
        row.lambda = s.cert->lambda;
        row.rho_min = rho_min(*s.cert, ms);
    }
    const auto t0 = std::chrono::steady_clock::now();
    try {
        if (spec.gauss_newton) {
            const auto gn = gauss_newton_wls(ms, s.net);
            row.status = to_string(gn.status);
            row.iterations = gn.iterations;
            row.message = gn.message;
            row.failed = gn.status == GaussNewtonStatus::singular;
            if (!row.failed) row.xi = rmse(gn.estimate.v, s.v, s.ref);
        } else {
            double rho = 1.0;
            if (!is_pf(spec.kind)) {
                rho = spec.rho.kind == RhoPolicy::Kind::fixed ? spec.rho.value : spec.rho.value * *row.rho_min;
                row.rho = rho;
            }
            ConicProgram prog = assemble(spec.kind, s.design, ms, rho, spec.penalty);
            if (config.decompose && !is_socp(spec.kind)) prog = decompose(prog);
            const ConicSolution sol = solve(prog, config.solver);
            row.status = to_string(sol.status);
            row.iterations = sol.iterations;
            row.message = sol.message;
            if (sol.status != SolveStatus::optimal) {
                row.failed = true;
            } else {
                const VoltageEstimate est = rank1_recover(sol.x, s.ref, prog.sparsity_edges());
                row.xi = rmse(est.v, s.v, s.ref);
                const ZetaResult z = sol.full() ? zeta(sol.dense(), s.v) : masked_zeta(sol.x, s.v);
                row.zeta = z.zeta;
                row.beta = z.beta;
                if (s.cert) {
                    row.zeta_max = is_pf(spec.kind) ? 0.0 : error_bound(*s.cert, rho, ms).zeta_max;
                }
            }
        }
    } catch (const std::exception& e) {
        row.failed = true;
        row.status = "error";
        row.message = e.what();
    }
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return row;
}

EstimationReport execute(const ExperimentConfig& config, bool paired_check) {
    const Setup s = prepare(config);
    const int ne = static_cast<int>(config.estimators.size());
    std::vector<TrialRow> rows(static_cast<std::size_t>(config.trials) * ne);

#pragma omp parallel for schedule(dynamic) if (config.parallel_trials)
    for (int k = 0; k < config.trials; ++k) {
        const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(k);
        std::optional<MeasurementSet> shared;
        std::uint64_t first = 0;
        for (int e = 0; e < ne; ++e) {
            TrialRow row;
            try {
                if (!shared || paired_check) shared = trial_measurements(config, s, seed);
                if (e == 0) first = shared->fingerprint();
                if (shared->fingerprint() != first) {
                    throw std::logic_error("measurement sets differ across estimators");
                }
                row = run_estimator(config, s, config.estimators[e], *shared);
            } catch (const std::exception& ex) {
                row.estimator = config.estimators[e].name();
                row.failed = true;
                row.status = "error";
                row.message = ex.what();
            }
            row.trial = k;
            row.seed = seed;
            rows[static_cast<std::size_t>(k) * ne + e] = std::move(row);
        }
    }

    EstimationReport report;
    report.rows = std::move(rows);
    aggregate(report);
    return report;
}

}  // namespace

EstimationReport run(const ExperimentConfig& config) { return execute(config, false); }

EstimationReport compare(const ExperimentConfig& config) {
    if (config.estimators.size() < 2) throw ConfigError("compare needs at least two estimators");
    return execute(config, true);
}

std::string comparison_csv(const EstimationReport& report) {
    std::ostringstream out;
    out << "estimator,trials,failures,mean_xi,median_xi,max_xi\n";
    for (const auto& name : estimator_order(report.rows)) {
        int trials = 0, failures = 0;
        for (const auto& r : report.rows) {
            if (r.estimator != name) continue;
            ++trials;
            failures += r.failed;
        }
        const Aggregate* a = report.find(name, "xi");
        out << name << ',' << trials << ',' << failures << ',';
        if (a && a->count > 0) out << format_number(a->mean) << ',' << format_number(a->median) << ',' << format_number(a->max);
        else out << ",,";
        out << '\n';
    }
    return out.str();
}

std::vector<SweepPoint> sweep(const ExperimentConfig& config) {
    if (config.sweep_fractions.empty()) throw ConfigError("sweep needs at least one injection fraction");
    config.validate();
    std::vector<SweepPoint> points;
    for (double f : config.sweep_fractions) {
        ExperimentConfig c = config;
        c.plan.injection_fraction = f;
        points.push_back({f, run(c)});
    }
    return points;
}

std::string sweep_csv(const std::vector<SweepPoint>& points) {
    std::ostringstream out;
    out << "fraction,estimator,measurements,failures,mean_xi,median_xi,max_xi\n";
    for (const auto& p : points) {
        for (const auto& name : estimator_order(p.report.rows)) {
            int failures = 0, m = 0;
            for (const auto& r : p.report.rows) {
                if (r.estimator != name) continue;
                failures += r.failed;
                m = r.measurements;
            }
            const Aggregate* a = p.report.find(name, "xi");
            out << format_number(p.fraction) << ',' << name << ',' << m << ',' << failures << ',';
            if (a && a->count > 0) {
                out << format_number(a->mean) << ',' << format_number(a->median) << ',' << format_number(a->max);
            } else {
                out << ",,";
            }
            out << '\n';
        }
    }
    return out.str();
}

}  // namespace conicpf
