#pragma once

#include <complex>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Sparse>
#include <nlohmann/json.hpp>

#include "conicpf/hermitian.hpp"

namespace conicpf {

enum class BusKind { pq, pv, slack };

/// Bus data in per-unit. Angles are radians internally.
struct BusRecord {
    int id = 0;
    BusKind kind = BusKind::pq;
    double load_p = 0.0;
    double load_q = 0.0;
    double shunt_g = 0.0;
    double shunt_b = 0.0;
    double vm = 1.0;  // stored magnitude
    double va = 0.0;  // stored angle, radians
    double gen_p = 0.0;
    double gen_q = 0.0;
    double gen_vm = 1.0;  // voltage setpoint of the attached generators
    bool has_gen = false;
};

struct BranchRecord {
    int from = 0;  // bus ids, not indices
    int to = 0;
    double r = 0.0;
    double x = 0.0;
    double b_charging = 0.0;
    double tap = 1.0;    // 0 in MATPOWER files is normalized to 1
    double shift = 0.0;  // radians
    bool in_service = true;
};

/// A validated network. Only in-service branches are kept.
struct NetworkCase {
    double base_mva = 100.0;
    std::vector<BusRecord> buses;
    std::vector<BranchRecord> branches;
    std::vector<std::string> warnings;

    int bus_count() const { return static_cast<int>(buses.size()); }
    int branch_count() const { return static_cast<int>(branches.size()); }
    int bus_index(int id) const;
    int slack_index() const;
    /// Stored voltage profile vm * exp(j va).
    CVector stored_voltages() const;
};

class CaseError : public std::runtime_error {
  public:
    enum class Kind { parse, validation };
    CaseError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

  private:
    Kind kind_;
};

/// Parses either the canonical JSON schema or the restricted MATPOWER
/// subset (mpc.baseMVA, mpc.bus, mpc.branch, mpc.gen). The format is
/// detected from the first non-blank character.
NetworkCase parse_case(std::string_view text);
NetworkCase load_case(const std::filesystem::path& path);

nlohmann::json case_to_json(const NetworkCase& net);
NetworkCase case_from_json(const nlohmann::json& doc);

/// Throws CaseError(validation) naming the first violated invariant.
void validate_case(const NetworkCase& net);

/// Nodal and branch admittance data with a tap/shift-aware pi model.
struct AdmittanceModel {
    using SpMat = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;

    int n_bus = 0;
    SpMat ybus;  // N x N
    SpMat yf;    // L x N, from-end currents
    SpMat yt;    // L x N, to-end currents
    std::vector<cplx> y_series;
    std::vector<cplx> tap;  // complex ratio tau * exp(j shift)
    std::vector<int> from;  // bus indices
    std::vector<int> to;

    int branch_count() const { return static_cast<int>(y_series.size()); }
    bool has_transformer(int branch) const;
    bool has_phase_shifter() const;
};

AdmittanceModel build_admittance(const NetworkCase& net);

/// Dense reference assembly straight from the branch equations. Tests use it
/// to check build_admittance.
CMatrix dense_ybus_reference(const NetworkCase& net);

/// Branch subset L' (indices into NetworkCase::branches).
struct EdgeSet {
    std::vector<int> branches;
    std::size_t size() const { return branches.size(); }
};

enum class TreeStrategy { min_weight_tree, full_graph, explicit_list };

TreeStrategy parse_tree_strategy(std::string_view name);

/// min_weight_tree runs Prim from the slack bus over weights 1/|y_st|.
/// Ties break on the sorted endpoint ids, then on the branch index, so the
/// chosen bus pairs do not depend on branch order.
EdgeSet spanning_subgraph(const NetworkCase& net, const AdmittanceModel& model,
                          TreeStrategy strategy, const std::vector<int>& explicit_branches = {});

/// Throws if the edge set does not connect every bus.
void require_spanning(const NetworkCase& net, const EdgeSet& edges);
bool is_acyclic(const NetworkCase& net, const EdgeSet& edges);

struct PowerFlowResult {
    CVector v;
    int iterations = 0;
    double mismatch = 0.0;
    bool converged = false;
};

/// Polar Newton-Raphson power flow from the case setpoints.
PowerFlowResult solve_power_flow(const NetworkCase& net, const AdmittanceModel& model,
                                 int max_iterations = 30, double tol = 1e-10);

enum class OperatingPointSource { stored, solve, automatic };

/// Voltage profile used as ground truth. The automatic policy uses the stored
/// profile unless every stored angle is zero (an unsolved case), in which case
/// the power flow is solved.
CVector operating_point(const NetworkCase& net, const AdmittanceModel& model,
                        OperatingPointSource source = OperatingPointSource::automatic);

/// Net complex injections diag(v v* Y*) computed directly from Y.
CVector nodal_injections(const AdmittanceModel& model, const CVector& v);

}  // namespace conicpf
