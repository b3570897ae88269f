#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "conicpf/hermitian.hpp"
#include "conicpf/netmodel.hpp"

namespace conicpf {

enum class MeasurementKind { voltage_sq, p_inj, q_inj, p_from, p_to, q_from, q_to };

std::string_view to_string(MeasurementKind kind);
MeasurementKind parse_measurement_kind(std::string_view name);
bool is_branch_kind(MeasurementKind kind);

/// Which physical quantity a record measures. `index` is a bus index for
/// voltage_sq/p_inj/q_inj and a branch index for the flow kinds.
struct MeasurementDescriptor {
    MeasurementKind kind = MeasurementKind::voltage_sq;
    int index = 0;

    friend bool operator==(const MeasurementDescriptor&, const MeasurementDescriptor&) = default;
};

struct CoefficientMatrix {
    MeasurementDescriptor descriptor;
    HermitianSparse matrix;
};

/// Matrix M with v* M v equal to the measured quantity. Voltage measurements
/// are squared magnitudes |v_k|^2.
CoefficientMatrix build_matrix(const AdmittanceModel& model, MeasurementDescriptor descriptor);

/// Tr(M v v*).
double evaluate(const CoefficientMatrix& m, const CVector& v);

struct MeasurementRecord {
    CoefficientMatrix coeff;
    double true_value = 0.0;
    double observed = 0.0;  // z_j
    double sigma = 1.0;
    double noise = 0.0;  // eta_j = observed - true_value
    bool bad_data = false;
};

struct MeasurementSet {
    int n_bus = 0;
    std::vector<MeasurementRecord> records;

    int size() const { return static_cast<int>(records.size()); }
    double kappa() const { return n_bus > 0 ? static_cast<double>(records.size()) / n_bus : 0.0; }
    /// Position of a descriptor in `records`, or -1.
    int find(MeasurementDescriptor d) const;
    /// Order-sensitive 64-bit FNV-1a hash over descriptors and observed values.
    std::uint64_t fingerprint() const;
};

/// Ordered list of measured quantities: bus voltages first, then flows over
/// the tree edges, then any extra descriptors.
struct MeasurementPlan {
    bool voltage_all = true;
    std::optional<EdgeSet> tree_flows;
    MeasurementKind tree_flow_kind = MeasurementKind::p_from;
    std::vector<MeasurementDescriptor> extra;

    std::vector<MeasurementDescriptor> expand(int n_bus) const;
};

struct KindMultipliers {
    double voltage = 1.0;
    double nodal = 1.5;
    double branch = 2.0;

    double for_kind(MeasurementKind kind) const;
};

enum class BadDataMode { none, gaussian, uniform };

struct BadDataConfig {
    BadDataMode mode = BadDataMode::none;
    double fraction = 0.0;
    double stddev = 0.1;  // gaussian mode
    double lo = 0.0;      // uniform mode
    double hi = 2.0;
    bool flows_only = false;  // restrict outliers to branch flow records
};

struct NoiseConfig {
    double level = 0.0;  // c
    KindMultipliers multipliers;
    /// sigma = multiplier * c * |true value| when true, multiplier * c otherwise.
    bool proportional = true;
    double sigma_floor = 1e-4;
    BadDataConfig bad_data;
    std::uint64_t seed = 0;

    void validate() const;
};

MeasurementSet sample_measurements(const AdmittanceModel& model, const CVector& v_true,
                                   const MeasurementPlan& plan, const NoiseConfig& noise);

nlohmann::json to_json(const MeasurementSet& set);
/// Rebuilds coefficient matrices from `model`.
MeasurementSet measurement_set_from_json(const nlohmann::json& doc, const AdmittanceModel& model);

}  // namespace conicpf
