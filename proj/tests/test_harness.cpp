#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "conicpf/harness.hpp"

using namespace conicpf;
namespace fs = std::filesystem;

namespace {

ExperimentConfig base_config(const std::string& name) {
    ExperimentConfig c;
    c.case_name = name;
    c.search_dirs = {CONICPF_DATA_DIR};
    c.seed = 17;
    return c;
}

// trials.csv without the trailing wall-time column
std::string strip_wall_time(const std::string& csv) {
    std::istringstream in(csv);
    std::string line, out;
    while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
    return out;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("case resolution") {
    CHECK(builtin_case("tb2").has_value());
    CHECK(builtin_case("tb3").has_value());
    CHECK_FALSE(builtin_case("case9").has_value());
    CHECK(resolve_case("case9", {CONICPF_DATA_DIR}).bus_count() == 9);
    CHECK(resolve_case(std::string(CONICPF_DATA_DIR) + "/case14.m", {}).bus_count() == 14);
    CHECK_THROWS_AS(resolve_case("case_missing", {CONICPF_DATA_DIR}), ConfigError);
}

TEST_CASE("estimator strings") {
    const EstimatorSpec a = parse_estimator("psse_socp:wls:0.25");
    CHECK(a.kind == RelaxationKind::psse_socp);
    CHECK(a.penalty.fit == DataFit::wls);
    CHECK(a.rho.kind == RhoPolicy::Kind::fixed);
    CHECK(a.rho.value == 0.25);
    const EstimatorSpec b = parse_estimator("psse_sdp:nuclear:3*rho_min");
    CHECK(b.rho.kind == RhoPolicy::Kind::rho_min);
    CHECK(b.rho.value == 3.0);
    CHECK(b.penalty.regularizer == Regularizer::nuclear);
    CHECK(parse_estimator("gauss_newton").gauss_newton);
    for (const auto* text : {"psse_sdp:wlav:rho_min", "pf_socp", "psse_sdp:wls+none:0.5", "gauss_newton"}) {
        const EstimatorSpec e = parse_estimator(text);
        CHECK(parse_estimator(e.name()).name() == e.name());
    }
    CHECK_THROWS_AS(parse_estimator("psse_sdp:wlav:abc"), ConfigError);
    CHECK_THROWS_AS(parse_estimator("bogus"), ConfigError);
    CHECK_THROWS_AS(parse_estimator("a:b:c:d"), ConfigError);
}

TEST_CASE("configuration errors") {
    ExperimentConfig c = base_config("case9");
    c.estimators = {parse_estimator("psse_sdp:wlav:1")};
    SUBCASE("missing case") {
        c.case_name = "case_missing";
        CHECK_THROWS_AS(run(c), ConfigError);
    }
    SUBCASE("compare needs two estimators") { CHECK_THROWS_AS(compare(c), ConfigError); }
    SUBCASE("no trials") {
        c.trials = 0;
        CHECK_THROWS_AS(c.validate(), ConfigError);
    }
    SUBCASE("bad injection fraction") {
        c.plan.injection_fraction = 1.5;
        CHECK_THROWS_AS(c.validate(), ConfigError);
    }
    SUBCASE("large case without stress") {
        c.case_name = "case2869pegase";
        CHECK_THROWS_AS(run(c), ConfigError);
    }
    SUBCASE("rho_min without a certificate") {
        c.tree = TreeStrategy::full_graph;
        c.estimators = {parse_estimator("psse_sdp:wlav:rho_min")};
        CHECK_THROWS_AS(run(c), ConfigError);
    }
    SUBCASE("unknown JSON key") {
        CHECK_THROWS_AS(config_from_json(nlohmann::json{{"case", "case9"}, {"trails", 3}}), ConfigError);
        CHECK_THROWS_AS(config_from_json(nlohmann::json{{"noise", {{"lvl", 0.1}}}}), ConfigError);
    }
}

TEST_CASE("noiseless case9 power flow run") {
    ExperimentConfig c = base_config("case9");
    c.estimators = {parse_estimator("pf_socp")};
    const EstimationReport r = run(c);
    REQUIRE(r.rows.size() == 1);
    const TrialRow& row = r.rows[0];
    CHECK_FALSE(row.failed);
    CHECK(row.status == "optimal");
    REQUIRE(row.xi.has_value());
    CHECK(*row.xi <= 1e-5);
    REQUIRE(row.zeta.has_value());
    CHECK(*row.zeta < 1e-4);
    CHECK(row.measurements == 17);
    CHECK(r.failures == 0);
}

TEST_CASE("noisy run reports the bound columns") {
    ExperimentConfig c = base_config("case9");
    c.noise.level = 0.01;
    c.trials = 3;
    c.estimators = {parse_estimator("psse_sdp:wlav:rho_min")};
    const EstimationReport r = run(c);
    REQUIRE(r.rows.size() == 3);
    for (const auto& row : r.rows) {
        CHECK_FALSE(row.failed);
        REQUIRE(row.rho.has_value());
        REQUIRE(row.rho_min.has_value());
        CHECK(*row.rho == doctest::Approx(*row.rho_min));
        CHECK(*row.zeta <= *row.zeta_max + 1e-6);
        CHECK(*row.lambda > 0.0);
    }
    const Aggregate* xi = r.find(r.rows[0].estimator, "xi");
    REQUIRE(xi != nullptr);
    CHECK(xi->count == 3);
    CHECK(xi->max >= xi->median);
    CHECK(r.find("nope", "xi") == nullptr);
}

TEST_CASE("replay is reproducible") {
    ExperimentConfig c = base_config("case14");
    c.noise.level = 0.05;
    c.noise.bad_data = {BadDataMode::uniform, 0.1, 0.1, 0.0, 2.0, false};
    c.trials = 3;
    c.estimators = {parse_estimator("psse_socp:wlav:0.5"), parse_estimator("gauss_newton")};
    const std::string a = run(c).trials_csv();
    c.parallel_trials = true;
    const std::string b = run(c).trials_csv();
    CHECK(strip_wall_time(a) == strip_wall_time(b));
    CHECK(a.substr(0, a.find('\n')) ==
          "trial,seed,estimator,fingerprint,measurements,xi,zeta,zeta_max,beta,lambda,f_wlav,rho,rho_min,status,"
          "iterations,wall_s");
}

TEST_CASE("paired comparison shares the measurements") {
    ExperimentConfig c = base_config("case9");
    c.noise.level = 0.05;
    c.trials = 2;
    c.estimators = {parse_estimator("psse_sdp:wlav:0.1"), parse_estimator("psse_sdp:wls:0.1"),
                    parse_estimator("psse_sdp:none:0.1")};
    const EstimationReport r = compare(c);
    REQUIRE(r.rows.size() == 6);
    for (int t = 0; t < 2; ++t) {
        CHECK(r.rows[3 * t].fingerprint == r.rows[3 * t + 1].fingerprint);
        CHECK(r.rows[3 * t].fingerprint == r.rows[3 * t + 2].fingerprint);
    }
    CHECK(r.rows[0].fingerprint != r.rows[3].fingerprint);
    const std::string table = comparison_csv(r);
    for (const auto& e : c.estimators) CHECK(table.find(e.name()) != std::string::npos);
}

TEST_CASE("config JSON round trip") {
    ExperimentConfig c = base_config("case30");
    c.tree = TreeStrategy::full_graph;
    c.plan.both_ends = true;
    c.plan.injection_fraction = 0.3;
    c.noise.level = 0.02;
    c.noise.proportional = false;
    c.noise.bad_data = {BadDataMode::gaussian, 0.2, 0.1, 0.0, 2.0, true};
    c.m0 = M0Strategy::unit_negative;
    c.estimators = {parse_estimator("psse_socp:wlav:2*rho_min"), parse_estimator("gauss_newton")};
    c.trials = 4;
    c.decompose = true;
    c.sweep_fractions = {0.0, 0.5};
    const nlohmann::json doc = to_json(c);
    const ExperimentConfig back = config_from_json(doc);
    CHECK(to_json(back) == doc);
    CHECK(back.estimators.size() == 2);
    CHECK(back.noise.bad_data.flows_only);
}

TEST_CASE("sweep and report files") {
    ExperimentConfig c = base_config("case9");
    c.noise.level = 0.01;
    c.estimators = {parse_estimator("psse_socp:wlav:1")};
    c.sweep_fractions = {0.0, 0.5};
    const auto points = sweep(c);
    REQUIRE(points.size() == 2);
    CHECK(points[1].report.rows[0].measurements > points[0].report.rows[0].measurements);
    CHECK(sweep_csv(points).find("0.5") != std::string::npos);

    const fs::path dir = fs::temp_directory_path() / "conicpf_harness_test";
    fs::remove_all(dir);
    write_report(points[0].report, c, dir);
    CHECK(fs::exists(dir / "trials.csv"));
    CHECK(fs::exists(dir / "summary.csv"));
    const auto doc = nlohmann::json::parse(slurp(dir / "report.json"));
    CHECK(doc.contains("config"));
    CHECK(doc["config"]["case"] == "case9");
    fs::remove_all(dir);
}
