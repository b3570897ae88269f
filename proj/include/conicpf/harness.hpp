#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "conicpf/measurements.hpp"
#include "conicpf/netmodel.hpp"
#include "conicpf/relaxations.hpp"
#include "conicpf/sdp.hpp"

namespace conicpf {

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Built-in networks: "tb2" (one lossless line, x = 0.2, v = (1, 1 at -10 deg)) and
/// "tb3" (a lossy three-bus chain). Returns nullopt for other names.
std::optional<NetworkCase> builtin_case(const std::string& name);

/// Built-in name, an existing path, or <dir>/<name>[.m|.json] for each search dir.
NetworkCase resolve_case(const std::string& name, const std::vector<std::filesystem::path>& search_dirs);

struct RhoPolicy {
    enum class Kind { fixed, rho_min } kind = Kind::fixed;
    double value = 1.0;  // the weight for fixed, a multiplier of rho_min otherwise
};

/// One estimator of a comparison. `gauss_newton` ignores the other fields.
struct EstimatorSpec {
    RelaxationKind kind = RelaxationKind::psse_sdp;
    Penalty penalty;
    RhoPolicy rho;
    bool gauss_newton = false;

    std::string name() const;
};

/// "gauss_newton", or "relaxation[:penalty[:rho]]" where rho is a number, "rho_min"
/// or "<k>*rho_min".
EstimatorSpec parse_estimator(const std::string& text);

struct PlanConfig {
    bool voltage_all = true;          // otherwise PQ buses and the reference only
    bool both_ends = false;           // p_to as well as p_from
    double injection_fraction = 0.0;  // share of buses with a measured p injection
    bool injection_reactive = false;  // measure q alongside p at those buses
};

struct ExperimentConfig {
    std::string case_name;
    std::vector<std::filesystem::path> search_dirs;
    OperatingPointSource operating_point = OperatingPointSource::automatic;
    TreeStrategy tree = TreeStrategy::min_weight_tree;  // edges carrying flow measurements and M0
    PlanConfig plan;
    NoiseConfig noise;
    M0Strategy m0 = M0Strategy::minus_susceptance;
    std::vector<EstimatorSpec> estimators;
    int trials = 1;
    std::uint64_t seed = 0;
    bool decompose = false;
    bool parallel_trials = false;
    bool stress = false;
    SolverOptions solver;
    std::vector<double> sweep_fractions;
    std::filesystem::path out_dir;

    void validate() const;
};

/// Unknown keys are rejected. Missing keys keep their defaults.
ExperimentConfig config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

/// One estimator on one trial. Quantities that do not apply are empty.
struct TrialRow {
    int trial = 0;
    std::uint64_t seed = 0;
    std::string estimator;
    std::uint64_t fingerprint = 0;
    int measurements = 0;
    std::optional<double> xi, zeta, zeta_max, beta, lambda, f_wlav, rho, rho_min;
    std::string status;
    int iterations = 0;
    double wall_seconds = 0.0;
    bool failed = false;
    std::string message;
};

struct Aggregate {
    std::string estimator;
    std::string column;
    int count = 0;
    double median = 0.0;
    double mean = 0.0;
    double max = 0.0;
};

struct EstimationReport {
    std::vector<TrialRow> rows;  // trial-major, estimators in config order
    std::vector<Aggregate> aggregates;
    int failures = 0;

    std::string trials_csv() const;  // metric columns in report_columns() order, wall time last
    std::string summary_csv() const;
    nlohmann::json to_json() const;
    /// Aggregate for one estimator and column, or nullptr.
    const Aggregate* find(const std::string& estimator, const std::string& column) const;
};

/// Numeric columns of TrialRow in report order.
const std::vector<std::string>& report_columns();

/// Validates, then runs every trial. Trial k uses seed + k. Per-trial failures are
/// recorded and the run continues.
EstimationReport run(const ExperimentConfig& config);

/// Like run with at least two estimators; each estimator regenerates its measurements
/// and the fingerprints must agree per trial.
EstimationReport compare(const ExperimentConfig& config);
std::string comparison_csv(const EstimationReport& report);

struct SweepPoint {
    double fraction = 0.0;
    EstimationReport report;
};

/// One run per injection fraction in config.sweep_fractions.
std::vector<SweepPoint> sweep(const ExperimentConfig& config);
std::string sweep_csv(const std::vector<SweepPoint>& points);

/// Writes trials.csv, summary.csv and report.json into dir.
void write_report(const EstimationReport& report, const ExperimentConfig& config, const std::filesystem::path& dir);

}  // namespace conicpf
