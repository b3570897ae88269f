// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "conicpf/certificates.hpp"
#include "conicpf/conic.hpp"
#include "conicpf/harness.hpp"
#include "conicpf/recovery.hpp"
#include "conicpf/relaxations.hpp"

using namespace conicpf;

namespace {

const std::vector<std::string> kCases = {"case9", "case14", "case30", "case57", "case118"};

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Network {
    NetworkCase net;
    AdmittanceModel model;
    CVector v;
    EdgeSet tree;
    ObjectiveDesign design;
    int ref = 0;

    explicit Network(NetworkCase n)
        : net(std::move(n)),
          model(build_admittance(net)),
          v(operating_point(net, model)),
          tree(spanning_subgraph(net, model, TreeStrategy::min_weight_tree)),
          design(design_m0(model, tree, M0Strategy::minus_susceptance)),
          ref(net.slack_index()) {}
};

Network load(const std::string& name) {
    if (auto b = builtin_case(name)) return Network(*b);
    return Network(load_case(std::string(CONICPF_DATA_DIR) + "/" + name + ".m"));
}

MeasurementSet tree_measurements(const Network& n, double level, std::uint64_t seed) {
    MeasurementPlan plan;
    plan.tree_flows = n.tree;
    NoiseConfig noise;
    noise.level = level;
    noise.seed = seed;
    return sample_measurements(n.model, n.v, plan, noise);
}

ExperimentConfig harness_config(const std::string& name, double level, int trials, std::uint64_t seed) {
    ExperimentConfig c;
    c.case_name = name;
    c.search_dirs = {CONICPF_DATA_DIR};
    c.noise.level = level;
    c.trials = trials;
    c.seed = seed;
    c.parallel_trials = true;
    return c;
}

double median(std::vector<double> x) {
    std::sort(x.begin(), x.end());
    const std::size_t n = x.size();
    return n % 2 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
}

std::vector<double> column(const EstimationReport& r, const std::string& estimator,
                           std::optional<double> TrialRow::*field) {
    std::vector<double> out;
    for (const auto& row : r.rows)
        if (row.estimator == estimator && row.*field) out.push_back(*(row.*field));
    return out;
}

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

Outcome noiseless_exactness() {
    Outcome o{true, ""};
    for (const auto& name : kCases) {
        const Network n = load(name);
        const ConicProgram prog = assemble(RelaxationKind::pf_socp, n.design, tree_measurements(n, 0.0, 0));
        const ConicSolution sol = solve(prog);
        double xi = INFINITY;
        if (sol.status == SolveStatus::optimal) xi = rmse(rank1_recover(sol.x, n.ref, prog.sparsity_edges()).v, n.v, n.ref);
        o.pass = o.pass && xi <= 1e-5;
        o.detail += name + " xi=" + fmt("%.1e", xi) + " ";
    }
    return o;
}

Outcome certificate_validity() {
    Outcome o{true, ""};
    for (const auto& name : kCases) {
        const Network n = load(name);
        const DualCertificate c = build_certificate(n.v, n.design, n.tree, n.model);
        const bool ok = verify_certificate(c, n.v).valid();
        o.pass = o.pass && ok;
        o.detail += name + (ok ? " ok" : " INVALID") + " lambda=" + fmt("%.3g", c.lambda) + " ";
    }
    return o;
}

Outcome bound_validity() {
    Outcome o{true, ""};
    for (const std::string name : {"case9", "case14"}) {
        for (double c : {0.01, 0.1}) {
            ExperimentConfig cfg = harness_config(name, c, 100, 1000);
            cfg.estimators = {parse_estimator("psse_sdp:wlav:rho_min")};
            const EstimationReport r = run(cfg);
            int held = 0;
            for (const auto& row : r.rows)
                if (!row.failed && row.zeta && row.zeta_max && *row.zeta <= *row.zeta_max + 1e-6) ++held;
            o.pass = o.pass && held == 100;
            o.detail += name + "@" + fmt("%g", c) + " " + std::to_string(held) + "/100 ";
        }
    }
    return o;
}

Outcome table_reproduction() {
    Outcome o{true, ""};
    const EstimatorSpec spec = parse_estimator("psse_sdp:wlav:rho_min");
    for (double c : {0.01, 0.1}) {
        ExperimentConfig cfg = harness_config("case9", c, 50, 2000);
        cfg.estimators = {spec};
        const EstimationReport r = run(cfg);
        const double z = median(column(r, spec.name(), &TrialRow::zeta));
        const double b = median(column(r, spec.name(), &TrialRow::beta));
        const double lambda = r.rows.front().lambda.value_or(0.0);
        const bool ok = c == 0.01 ? (z >= 0.005 && z <= 0.05 && b >= 0.98 && b <= 1.02 && lambda > 0.0 && r.failures == 0)
                                  : (z >= 0.015 && z <= 0.15 && r.failures == 0);
        o.pass = o.pass && ok;
        o.detail += "c=" + fmt("%g", c) + " zeta=" + fmt("%.4f", z) + " beta=" + fmt("%.4f", b) +
                    " lambda=" + fmt("%.4f", lambda) + " ";
    }
    return o;
}

Outcome decomposition_equivalence() {
    Outcome o{true, ""};
    for (const std::string name : {"case9", "case14"}) {
        const Network n = load(name);
        const DualCertificate cert = build_certificate(n.v, n.design, n.tree, n.model);
        double worst = 0.0;
        bool solved = true;
        for (int trial = 0; trial < 10; ++trial) {
            const MeasurementSet ms = tree_measurements(n, trial < 5 ? 0.01 : 0.1, 3000 + trial);
            const ConicProgram full = assemble(RelaxationKind::psse_sdp, n.design, ms, rho_min(cert, ms));
            const ConicSolution a = solve(full);
            const ConicSolution b = solve(decompose(full));
            solved = solved && a.status == SolveStatus::optimal && b.status == SolveStatus::optimal;
            worst = std::max(worst, std::abs(a.objective - b.objective) / (1.0 + std::abs(a.objective)));
        }
        o.pass = o.pass && solved && worst <= 1e-6;
        o.detail += name + " max rel diff=" + fmt("%.1e", worst) + " ";
    }
    return o;
}

Outcome robustness_trend() {
    Outcome o{true, ""};
    const std::vector<std::string> pens = {"wlav", "wls", "nuclear", "none"};
    for (const std::string name : {"case9", "case14", "case30"}) {
        ExperimentConfig cfg = harness_config(name, 0.1, 50, 4000);
        cfg.noise.bad_data = {BadDataMode::uniform, 0.1, 0.1, 0.0, 2.0, false};
        for (const auto& p : pens) cfg.estimators.push_back(parse_estimator("psse_sdp:" + p + ":0.1"));
        const EstimationReport r = compare(cfg);
        std::vector<double> mean;
        for (const auto& e : cfg.estimators) {
            const Aggregate* a = r.find(e.name(), "xi");
            mean.push_back(a ? a->mean : INFINITY);
        }
        const bool ok = r.failures == 0 && mean[0] < mean[1] && mean[0] < mean[2] && mean[0] < mean[3];
        o.pass = o.pass && ok;
        o.detail += name + " xi(" + fmt("%.3f", mean[0]) + "," + fmt("%.3f", mean[1]) + "," + fmt("%.3f", mean[2]) +
                    "," + fmt("%.3f", mean[3]) + ") ";
    }

    ExperimentConfig cfg = harness_config("case57", 1.0, 30, 100);
    cfg.tree = TreeStrategy::full_graph;
    cfg.plan.both_ends = true;
    cfg.m0 = M0Strategy::unit_negative;
    cfg.noise.proportional = false;
    cfg.noise.multipliers = {0.002, 0.001, 0.001};
    cfg.noise.sigma_floor = 1e-6;
    cfg.noise.bad_data = {BadDataMode::gaussian, 0.2, 0.1, 0.0, 2.0, true};
    cfg.estimators = {parse_estimator("psse_socp:wlav:1"), parse_estimator("gauss_newton")};
    const EstimationReport r = compare(cfg);
    const double socp = median(column(r, cfg.estimators[0].name(), &TrialRow::xi));
    const double gn = median(column(r, cfg.estimators[1].name(), &TrialRow::xi));
    o.pass = o.pass && socp < gn;
    o.detail += "case57 median xi socp=" + fmt("%.4f", socp) + " gn=" + fmt("%.4f", gn);
    return o;
}

Outcome tail_bound_check() {
    Outcome o{true, ""};
    const double c = 0.1;
    const int trials = 500;
    for (const std::string name : {"tb2", "case9"}) {
        const Network n = load(name);
        const DualCertificate cert = build_certificate(n.v, n.design, n.tree, n.model);
        // proportional sigma depends on the true values only, so rho_min is the same in every trial
        const double rho = rho_min(cert, tree_measurements(n, c, 0));
        const int m = tree_measurements(n, c, 0).size();
        const int nb = n.net.bus_count();
        const double gamma = std::log(100.0) / m;
        const double t = tail_threshold(gamma, m, nb, cert.lambda, rho);
        const TailBound tb = tail_bound(t, m, nb, cert.lambda, rho);
        int exceed = 0, failed = 0;
#pragma omp parallel for schedule(dynamic) reduction(+ : exceed, failed)
        for (int k = 0; k < trials; ++k) {
            const MeasurementSet ms = tree_measurements(n, c, 5000 + k);
            const ConicSolution sol = solve(assemble(RelaxationKind::psse_sdp, n.design, ms, rho));
            if (sol.status != SolveStatus::optimal) {
                ++failed;
                continue;
            }
            if (zeta(sol.dense(), n.v).zeta > t) ++exceed;
        }
        const double freq = static_cast<double>(exceed) / trials;
        const bool ok = failed == 0 && tb.gamma > 0.0 && freq <= tb.bound;
        o.pass = o.pass && ok;
        o.detail += name + " t=" + fmt("%.3f", t) + " freq=" + fmt("%.3f", freq) + " bound=" + fmt("%.3f", tb.bound) + " ";
    }
    return o;
}

// Random lossy tree with charging; resampled until the assumption holds.
Network random_network(int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (;;) {
        NetworkCase net;
        std::vector<double> ang(n, 0.0);
        for (int k = 0; k < n; ++k) {
            BusRecord b;
            b.id = k + 1;
            b.kind = k == 0 ? BusKind::slack : BusKind::pq;
            net.buses.push_back(b);
        }
        for (int k = 1; k < n; ++k) {
            const int parent = static_cast<int>(u(rng) * k);
            ang[k] = ang[parent] + (-40.0 + 80.0 * u(rng)) * std::numbers::pi / 180.0;
            BranchRecord br;
            br.from = parent + 1;
            br.to = k + 1;
            br.x = 0.05 + 0.3 * u(rng);
            br.r = br.x * 0.3 * u(rng);
            br.b_charging = 0.02 * u(rng);
            net.branches.push_back(br);
        }
        for (int k = 0; k < n; ++k) {
            net.buses[k].vm = 0.9 + 0.2 * u(rng);
            net.buses[k].va = ang[k];
        }
        Network candidate(net);
        if (check_assumption1(candidate.design, candidate.model, candidate.v, candidate.tree).pass) return candidate;
    }
}

bool oracle_agrees(const Network& n, double& gap, double& round_trip) {
    const MeasurementSet ms = tree_measurements(n, 0.0, 0);
    std::vector<double> mags(n.net.bus_count());
    for (int k = 0; k < n.net.bus_count(); ++k) mags[k] = std::abs(n.v[k]);
    std::vector<FlowReading> flows;
    for (const auto& r : ms.records)
        if (r.coeff.descriptor.kind == MeasurementKind::p_from) flows.push_back({r.coeff.descriptor.index, r.observed});
    const VoltageEstimate direct = direct_pf_oracle(n.model, mags, flows, n.tree, n.ref);
    const ConicProgram prog = assemble(RelaxationKind::pf_socp, n.design, ms);
    const ConicSolution sol = solve(prog);
    if (sol.status != SolveStatus::optimal) return false;
    const VoltageEstimate relaxed = rank1_recover(sol.x, n.ref, prog.sparsity_edges());
    gap = rmse(direct.v, relaxed.v, n.ref);
    round_trip = rmse(direct.v, n.v, n.ref);
    return gap <= 1e-6 && round_trip <= 1e-10;
}

Outcome oracle_equivalence() {
    double worst_gap = 0.0, worst_trip = 0.0;
    int agreed = 0, total = 0;
    auto check = [&](const Network& n) {
        double gap = INFINITY, trip = INFINITY;
        const bool ok = oracle_agrees(n, gap, trip);
        worst_gap = std::max(worst_gap, gap);
        worst_trip = std::max(worst_trip, trip);
        agreed += ok;
        ++total;
    };
    check(load("tb3"));
    std::mt19937_64 rng(77);
    for (int k = 0; k < 200; ++k) check(random_network(2 + k % 7, rng));
    return {agreed == total, std::to_string(agreed) + "/" + std::to_string(total) + " max gap=" +
                                 fmt("%.1e", worst_gap) + " max round trip=" + fmt("%.1e", worst_trip)};
}

Outcome scaling_smoke() {
    const Network n = load("case118");
    const MeasurementSet ms = tree_measurements(n, 0.01, 9);
    const auto t0 = std::chrono::steady_clock::now();
    const ConicSolution sol = solve(assemble(RelaxationKind::psse_socp, n.design, ms, 1.0));
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {sol.status == SolveStatus::optimal && dt < 30.0, fmt("%.2f s", dt) + " status " + to_string(sol.status)};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"noiseless exactness", noiseless_exactness},
        {"certificate validity", certificate_validity},
        {"error bound validity", bound_validity},
        {"error statistics on case9", table_reproduction},
        {"decomposition equivalence", decomposition_equivalence},
        {"robustness to bad data", robustness_trend},
        {"tail bound", tail_bound_check},
        {"oracle equivalence", oracle_equivalence},
        {"case118 scaling", scaling_smoke},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %zu %s: %s [%.1f s] %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first, dt,
                    o.detail.c_str());
        std::fflush(stdout);
        failed += !o.pass;
    }
    return failed == 0 ? 0 : 1;
}
