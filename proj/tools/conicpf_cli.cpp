#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "conicpf/certificates.hpp"
#include "conicpf/conic.hpp"
#include "conicpf/harness.hpp"
#include "conicpf/recovery.hpp"
#include "conicpf/relaxations.hpp"

#ifndef CONICPF_DATA_DIR
#define CONICPF_DATA_DIR "data"
#endif

namespace fs = std::filesystem;
using namespace conicpf;

namespace {

struct Flags {
    std::string case_name;
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
    std::optional<double> noise_level;
    std::string rho;
    std::string penalty;
    std::string relaxation;
    std::string tree;
    bool decompose = false;
    std::string out_dir;
    bool stress = false;
    bool parallel_trials = false;
    std::vector<std::string> estimators;
    std::vector<double> fractions;
};

void add_common(CLI::App* app, Flags& f) {
    app->add_option("--case", f.case_name, "case file, case name under data/, or tb2/tb3");
    app->add_option("--config", f.config, "JSON experiment config; flags override its fields");
    app->add_option("--seed", f.seed, "base seed, trial k uses seed + k");
    app->add_option("--trials", f.trials, "number of Monte-Carlo trials");
    app->add_option("--noise-level", f.noise_level, "noise level c");
    app->add_option("--rho", f.rho, "penalty weight: a number, rho_min or k*rho_min");
    app->add_option("--penalty", f.penalty, "wlav, wls, nuclear, none or fit+regularizer");
    app->add_option("--relaxation", f.relaxation, "pf_sdp, pf_socp, psse_sdp or psse_socp");
    app->add_option("--tree", f.tree, "min_weight_tree or full_graph");
    app->add_flag("--decompose", f.decompose, "split the PSD constraint over tree-decomposition bags");
    app->add_option("--out-dir", f.out_dir, "directory for CSV and JSON outputs");
    app->add_flag("--stress", f.stress, "allow large cases, SOCP by default");
    app->add_flag("--parallel-trials", f.parallel_trials, "run trials concurrently");
    app->add_option("--estimator", f.estimators, "relaxation:penalty:rho or gauss_newton, repeatable");
}

ExperimentConfig build_config(const Flags& f, const std::vector<std::string>& default_estimators) {
    ExperimentConfig c = f.config.empty() ? ExperimentConfig{} : load_config(f.config);
    c.search_dirs.insert(c.search_dirs.end(), {fs::path("."), fs::path("data"), fs::path(CONICPF_DATA_DIR)});
    if (!f.case_name.empty()) c.case_name = f.case_name;
    if (f.seed) c.seed = *f.seed;
    if (f.trials) c.trials = *f.trials;
    if (f.noise_level) c.noise.level = *f.noise_level;
    if (!f.tree.empty()) c.tree = parse_tree_strategy(f.tree);
    if (f.decompose) c.decompose = true;
    if (f.stress) c.stress = true;
    if (f.parallel_trials) c.parallel_trials = true;
    if (!f.out_dir.empty()) c.out_dir = f.out_dir;
    if (!f.fractions.empty()) c.sweep_fractions = f.fractions;

    if (!f.estimators.empty()) {
        c.estimators.clear();
        for (const auto& e : f.estimators) c.estimators.push_back(parse_estimator(e));
    }
    if (c.estimators.empty()) {
        for (const auto& e : default_estimators) c.estimators.push_back(parse_estimator(e));
        if (c.stress) {
            for (auto& e : c.estimators) {
                if (e.kind == RelaxationKind::psse_sdp) e.kind = RelaxationKind::psse_socp;
                if (e.kind == RelaxationKind::pf_sdp) e.kind = RelaxationKind::pf_socp;
            }
        }
    }
    if (!f.relaxation.empty() || !f.penalty.empty() || !f.rho.empty()) {
        // a single estimator assembled from the flags, starting from the first configured one
        const EstimatorSpec base = c.estimators.front();
        std::string text = f.relaxation.empty() ? to_string(base.kind) : f.relaxation;
        text += ":" + (f.penalty.empty() ? to_string(base.penalty) : f.penalty);
        EstimatorSpec spec = parse_estimator(text);
        spec.rho = f.rho.empty() ? base.rho : parse_estimator("psse_sdp:wlav:" + f.rho).rho;
        c.estimators = {spec};
    }
    return c;
}

void write_text(const fs::path& dir, const std::string& name, const std::string& text) {
    fs::create_directories(dir);
    std::ofstream out(dir / name);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    out << text;
}

int cmd_pf_recover(const Flags& f) {
    ExperimentConfig c = build_config(f, {"pf_socp"});
    c.validate();
    const EstimatorSpec spec = c.estimators.front();
    if (spec.gauss_newton || !is_pf(spec.kind)) throw ConfigError("pf-recover needs pf_sdp or pf_socp");
    const NetworkCase net = resolve_case(c.case_name, c.search_dirs);
    const AdmittanceModel model = build_admittance(net);
    const CVector v = operating_point(net, model, c.operating_point);
    const int ref = net.slack_index();
    const EdgeSet edges = spanning_subgraph(net, model, c.tree);
    const ObjectiveDesign design = design_m0(model, edges, c.m0);
    const AssumptionReport assumption = check_assumption1(design, model, v, edges);

    MeasurementPlan plan;
    plan.tree_flows = edges;
    NoiseConfig noiseless;
    const MeasurementSet ms = sample_measurements(model, v, plan, noiseless);
    ConicProgram prog = assemble(spec.kind, design, ms);
    if (c.decompose && !is_socp(spec.kind)) prog = decompose(prog);
    const ConicSolution sol = solve(prog, c.solver);

    nlohmann::json out = {{"case", c.case_name},
                          {"buses", net.bus_count()},
                          {"relaxation", to_string(spec.kind)},
                          {"cone", to_string(prog.cone)},
                          {"assumption_pass", assumption.pass},
                          {"status", to_string(sol.status)},
                          {"iterations", sol.iterations},
                          {"objective", sol.objective}};
    for (const auto& w : design.warnings) out["warnings"].push_back(w);
    int code = 0;
    if (sol.status == SolveStatus::optimal) {
        const VoltageEstimate est = rank1_recover(sol.x, ref, prog.sparsity_edges());
        out["xi"] = rmse(est.v, v, ref);
        out["method"] = to_string(est.method);
        if (is_acyclic(net, edges)) {
            std::vector<double> mags(net.bus_count());
            for (int k = 0; k < net.bus_count(); ++k) mags[k] = std::abs(v[k]);
            std::vector<FlowReading> flows;
            for (const auto& r : ms.records) {
                if (r.coeff.descriptor.kind == MeasurementKind::p_from) flows.push_back({r.coeff.descriptor.index, r.observed});
            }
            try {
                const VoltageEstimate direct = direct_pf_oracle(model, mags, flows, edges, ref);
                out["oracle_xi"] = rmse(direct.v, v, ref);
                out["oracle_gap"] = rmse(direct.v, est.v, ref);
            } catch (const std::exception& e) {
                out["oracle_error"] = e.what();
            }
        }
        if (!c.out_dir.empty()) write_text(c.out_dir, "voltages.csv", to_csv(est, net));
    } else {
        out["message"] = sol.message;
        code = 1;
    }
    std::cout << out.dump(2) << "\n";
    return code;
}

int cmd_certify(const Flags& f) {
    ExperimentConfig c = build_config(f, {"pf_socp"});
    c.validate();
    const NetworkCase net = resolve_case(c.case_name, c.search_dirs);
    const AdmittanceModel model = build_admittance(net);
    const CVector v = operating_point(net, model, c.operating_point);
    const EdgeSet edges = spanning_subgraph(net, model, c.tree);
    const ObjectiveDesign design = design_m0(model, edges, c.m0);
    const AssumptionReport assumption = check_assumption1(design, model, v, edges);
    nlohmann::json out = {{"case", c.case_name}, {"assumption_pass", assumption.pass}};
    int code = 0;
    try {
        const DualCertificate cert = build_certificate(v, design, edges, model);
        const CertificateCheck check = verify_certificate(cert, v);
        out["certificate"] = to_json(cert);
        out["check"] = {{"psd", check.psd},
                        {"null_vector", check.null_vector},
                        {"rank", check.rank},
                        {"psd_margin", check.psd_margin},
                        {"null_margin", check.null_margin},
                        {"near_zero", check.near_zero},
                        {"valid", check.valid()}};
        if (c.noise.level > 0.0) {
            MeasurementPlan plan;
            plan.tree_flows = edges;
            NoiseConfig noise = c.noise;
            noise.seed = c.seed;
            const MeasurementSet ms = sample_measurements(model, v, plan, noise);
            out["bound"] = to_json(error_bound(cert, rho_min(cert, ms), ms));
        }
        if (!check.valid()) code = 1;
    } catch (const std::exception& e) {
        out["error"] = e.what();
        code = 1;
    }
    if (!c.out_dir.empty()) write_text(c.out_dir, "certificate.json", out.dump(2) + "\n");
    std::cout << out.dump(2) << "\n";
    return code;
}

int cmd_estimate(const Flags& f) {
    ExperimentConfig c = build_config(f, {"psse_sdp:wlav:rho_min"});
    const EstimationReport report = run(c);
    write_report(report, c, c.out_dir.empty() ? fs::path("out") : c.out_dir);
    std::cout << report.summary_csv();
    return report.failures > 0 ? 1 : 0;
}

int cmd_compare(const Flags& f) {
    ExperimentConfig c = build_config(
        f, {"psse_sdp:wlav:0.1", "psse_sdp:wls:0.1", "psse_sdp:nuclear:0.1", "psse_sdp:none:0.1"});
    const EstimationReport report = compare(c);
    const fs::path dir = c.out_dir.empty() ? fs::path("out") : c.out_dir;
    write_report(report, c, dir);
    const std::string table = comparison_csv(report);
    write_text(dir, "comparison.csv", table);
    std::cout << table;
    return report.failures > 0 ? 1 : 0;
}

int cmd_sweep(const Flags& f) {
    ExperimentConfig c = build_config(f, {"psse_sdp:wlav:rho_min"});
    if (c.sweep_fractions.empty()) c.sweep_fractions = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
    const auto points = sweep(c);
    const std::string table = sweep_csv(points);
    write_text(c.out_dir.empty() ? fs::path("out") : c.out_dir, "sweep.csv", table);
    std::cout << table;
    int failures = 0;
    for (const auto& p : points) failures += p.report.failures;
    return failures > 0 ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Convex power flow and state estimation"};
    app.require_subcommand(1);
    Flags flags;
    auto* pf = app.add_subcommand("pf-recover", "noiseless recovery through a PF relaxation");
    auto* est = app.add_subcommand("estimate", "Monte-Carlo state estimation with the error report");
    auto* cert = app.add_subcommand("certify", "build and verify the dual certificate");
    auto* cmp = app.add_subcommand("compare", "paired comparison of two or more estimators");
    auto* swp = app.add_subcommand("sweep", "error against the share of buses with injection measurements");
    for (auto* s : {pf, est, cert, cmp, swp}) add_common(s, flags);
    swp->add_option("--fractions", flags.fractions, "injection fractions");

    CLI11_PARSE(app, argc, argv);
    try {
        if (pf->parsed()) return cmd_pf_recover(flags);
        if (est->parsed()) return cmd_estimate(flags);
        if (cert->parsed()) return cmd_certify(flags);
        if (cmp->parsed()) return cmd_compare(flags);
        if (swp->parsed()) return cmd_sweep(flags);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
