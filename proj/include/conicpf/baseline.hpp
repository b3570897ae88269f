#pragma once

#include <string>

#include "conicpf/measurements.hpp"
#include "conicpf/netmodel.hpp"
#include "conicpf/recovery.hpp"

namespace conicpf {

struct GaussNewtonConfig {
    int max_iterations = 50;
    double step_tolerance = 1e-8;
    bool flat_start = true;  // |v| = 1, angle 0; otherwise start from the stored profile
};

enum class GaussNewtonStatus { converged, max_iterations, diverged, singular };

std::string to_string(GaussNewtonStatus status);

struct GaussNewtonResult {
    VoltageEstimate estimate;  // best iterate seen
    GaussNewtonStatus status = GaussNewtonStatus::max_iterations;
    int iterations = 0;
    double objective = 0.0;  // sum ((z - h(x)) / sigma)^2 at the returned iterate
    std::string message;
};

/// Plain Gauss-Newton WLS on [theta (non-reference), |v|]. Squared-magnitude records
/// enter as magnitude pseudo-measurements sqrt(z) with sigma / (2 sqrt(z)).
GaussNewtonResult gauss_newton_wls(const MeasurementSet& measurements, const NetworkCase& net,
                                   const GaussNewtonConfig& config = {});

}  // namespace conicpf
