#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "conicpf/certificates.hpp"
#include "conicpf/harness.hpp"

using namespace conicpf;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

NetworkCase data_case(const std::string& name) { return load_case(std::string(CONICPF_DATA_DIR) + "/" + name + ".m"); }

struct Tb2 {
    NetworkCase net = *builtin_case("tb2");
    AdmittanceModel model = build_admittance(net);
    EdgeSet edges = spanning_subgraph(net, model, TreeStrategy::min_weight_tree);
    CVector v = net.stored_voltages();

    ObjectiveDesign unit_m0(double scale = 1.0) const {
        HermitianSparse m0(2);
        m0.add(0, 1, -scale);
        return design_m0(model, edges, m0);
    }
};

double frobenius_zeta(const CMatrix& x, const CVector& v, double beta) {
    const double n = static_cast<double>(v.size());
    return (x - beta * v * v.adjoint()).norm() / std::sqrt(n * x.trace().real());
}

}  // namespace

TEST_CASE("TB2 certificate matches the hand solution") {
    const Tb2 t;
    const DualCertificate c = build_certificate(t.v, t.unit_m0(), t.edges, t.model);
    // H v = 0 forces H_12 = -a exp(j 10 deg) with H_11 = H_22 = a; M0_12 = -1 fixes a
    const double a = 1.0 / std::cos(10.0 * kDeg);
    const double mu_flow = -a * std::sin(10.0 * kDeg) / 2.5;
    REQUIRE(c.mu.size() == 3);
    CHECK(c.mu[0] == doctest::Approx(a).epsilon(1e-10));
    CHECK(c.mu[1] == doctest::Approx(a).epsilon(1e-10));
    CHECK(c.mu[2] == doctest::Approx(mu_flow).epsilon(1e-10));
    CHECK(c.mu[0] == doctest::Approx(1.01543).epsilon(1e-5));
    CHECK(c.mu[2] == doctest::Approx(-0.070530).epsilon(1e-4));
    CHECK(c.lambda == doctest::Approx(2.0 * a).epsilon(1e-10));
    CHECK(c.lambda == doctest::Approx(2.03085).epsilon(1e-5));
    CHECK(std::abs(c.lambda_min) < 1e-12);
    CHECK(c.null_residual < 1e-12);
    CHECK(verify_certificate(c, t.v).valid());
}

TEST_CASE("susceptance-based M0 on TB2") {
    const Tb2 t;
    const ObjectiveDesign d = design_m0(t.model, t.edges, M0Strategy::minus_susceptance);
    const DualCertificate c = build_certificate(t.v, d, t.edges, t.model);
    const double a = 5.0 / std::cos(10.0 * kDeg);
    // voltage multipliers absorb the M0 diagonal of 5
    CHECK(c.mu[0] == doctest::Approx(a - 5.0).epsilon(1e-10));
    CHECK(c.mu[2] == doctest::Approx(-a * std::sin(10.0 * kDeg) / 2.5).epsilon(1e-10));
    CHECK(c.lambda == doctest::Approx(2.0 * a).epsilon(1e-10));
    CHECK(verify_certificate(c, t.v).valid());
}

TEST_CASE("dual matrix assembles the weighted sum") {
    const Tb2 t;
    const ObjectiveDesign d = t.unit_m0();
    const DualCertificate c = build_certificate(t.v, d, t.edges, t.model);
    std::vector<HermitianSparse> mats;
    for (const auto& desc : c.descriptors) mats.push_back(build_matrix(t.model, desc).matrix);
    const HermitianSparse h = dual_matrix(d.m0, mats, c.mu);
    CHECK((h.to_dense() - c.h.to_dense()).norm() < 1e-14);
    const EigenData e = hermitian_eigen(h);
    CHECK(e.lambda2 == doctest::Approx(c.lambda));
    CHECK(e.values.size() == 2);
}

TEST_CASE("verification rejects broken certificates") {
    const Tb2 t;
    DualCertificate c = build_certificate(t.v, t.unit_m0(), t.edges, t.model);
    SUBCASE("perturbed multiplier") {
        std::vector<HermitianSparse> mats;
        for (const auto& desc : c.descriptors) mats.push_back(build_matrix(t.model, desc).matrix);
        auto mu = c.mu;
        mu[2] += 1e-3;
        const CertificateCheck check = verify_certificate(dual_matrix(t.unit_m0().m0, mats, mu), t.v);
        CHECK_FALSE(check.null_vector);
        CHECK_FALSE(check.valid());
    }
    SUBCASE("zero matrix") {
        const CertificateCheck check = verify_certificate(HermitianSparse(2), t.v);
        CHECK_FALSE(check.rank);
        CHECK_FALSE(check.valid());
    }
    SUBCASE("indefinite matrix") {
        HermitianSparse h(2);
        h.add(0, 0, 1.0);
        h.add(1, 1, -1.0);
        CHECK_FALSE(verify_certificate(h, t.v).psd);
    }
}

TEST_CASE("certificates on the test networks") {
    for (std::string name : {"case9", "case14", "case30", "case57", "case118"}) {
        CAPTURE(name);
        const NetworkCase net = data_case(name);
        const AdmittanceModel m = build_admittance(net);
        const CVector v = operating_point(net, m);
        const EdgeSet edges = spanning_subgraph(net, m, TreeStrategy::min_weight_tree);
        const DualCertificate c = build_certificate(v, design_m0(m, edges, M0Strategy::minus_susceptance), edges, m);
        const CertificateCheck check = verify_certificate(c, v);
        CHECK(check.valid());
        CHECK(check.near_zero == 1);
        CHECK(c.lambda > 0.0);
        CHECK(c.mu.size() == static_cast<std::size_t>(2 * net.bus_count() - 1));
        CHECK((c.h.multiply(v)).norm() <= 1e-8 * c.h.to_dense().norm() * v.norm());
    }
}

TEST_CASE("scaling M0 scales the certificate") {
    const Tb2 t;
    const DualCertificate base = build_certificate(t.v, t.unit_m0(), t.edges, t.model);
    for (double k : {0.5, 2.0, 7.0}) {
        const DualCertificate c = build_certificate(t.v, t.unit_m0(k), t.edges, t.model);
        CHECK(c.lambda == doctest::Approx(k * base.lambda));
        for (std::size_t j = 0; j < c.mu.size(); ++j) CHECK(c.mu[j] == doctest::Approx(k * base.mu[j]));
    }
}

TEST_CASE("zeta against a direct evaluation") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    for (int n = 2; n <= 6; ++n) {
        CVector v(n);
        for (int k = 0; k < n; ++k) v[k] = std::polar(1.0 + 0.05 * g(rng), 0.2 * g(rng));
        SUBCASE("exact rank one") {
            const ZetaResult z = zeta(2.5 * v * v.adjoint(), v);
            CHECK(z.beta == doctest::Approx(2.5));
            CHECK(z.zeta < 1e-12);
        }
        SUBCASE("perturbed") {
            CMatrix e(n, n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) e(i, j) = 0.01 * cplx(g(rng), g(rng));
            const CMatrix x = v * v.adjoint() + e * e.adjoint();
            const double beta = (v.adjoint() * x * v)(0, 0).real() / std::pow(v.squaredNorm(), 2);
            const ZetaResult z = zeta(x, v);
            CHECK(z.beta == doctest::Approx(beta).epsilon(1e-12));
            CHECK(z.zeta == doctest::Approx(frobenius_zeta(x, v, beta)).epsilon(1e-12));
        }
    }
    SUBCASE("identity on two buses") {
        CVector v(2);
        v << 1.0, 1.0;
        // beta = 2/4, residual I - J/2 has Frobenius norm 1, Tr X = 2
        const ZetaResult z = zeta(CMatrix::Identity(2, 2), v);
        CHECK(z.beta == doctest::Approx(0.5));
        CHECK(z.zeta == doctest::Approx(0.5));
    }
}

TEST_CASE("tail bound") {
    CHECK_THROWS(tail_bound(0.0, 17, 9, 1.0, 1.0));
    const TailBound small = tail_bound(1e-3, 17, 9, 1.0, 1.0);
    CHECK(small.vacuous);
    CHECK(small.bound == 1.0);
    const TailBound a = tail_bound(0.5, 17, 9, 1.5, 0.2);
    const TailBound b = tail_bound(1.0, 17, 9, 1.5, 0.2);
    // gamma + ln 2 grows with t^4
    CHECK(b.gamma + std::log(2.0) == doctest::Approx(16.0 * (a.gamma + std::log(2.0))));
    const double kappa = 17.0 / 9.0;
    CHECK(b.kappa == doctest::Approx(kappa));
    CHECK(b.gamma == doctest::Approx(1.5 * 1.5 / (32.0 * kappa * kappa * 0.04) - std::log(2.0)));
    CHECK(b.bound == doctest::Approx(std::min(1.0, std::exp(-b.gamma * 17))));
    for (double gamma : {0.01, 0.3, 2.0}) {
        const double t = tail_threshold(gamma, 17, 9, 1.5, 0.2);
        CHECK(tail_bound(t, 17, 9, 1.5, 0.2).gamma == doctest::Approx(gamma));
    }
}

TEST_CASE("error bound report") {
    const NetworkCase net = data_case("case9");
    const AdmittanceModel m = build_admittance(net);
    const CVector v = operating_point(net, m);
    const EdgeSet edges = spanning_subgraph(net, m, TreeStrategy::min_weight_tree);
    const DualCertificate c = build_certificate(v, design_m0(m, edges, M0Strategy::minus_susceptance), edges, m);
    MeasurementPlan plan;
    plan.tree_flows = edges;
    SUBCASE("noiseless data gives a zero bound") {
        const MeasurementSet ms = sample_measurements(m, v, plan, NoiseConfig{});
        const BoundReport r = error_bound(c, 1.0, ms);
        CHECK(r.f_wlav == 0.0);
        CHECK(r.zeta_max == 0.0);
    }
    SUBCASE("noisy data") {
        NoiseConfig noise;
        noise.level = 0.01;
        noise.seed = 4;
        const MeasurementSet ms = sample_measurements(m, v, plan, noise);
        const auto mu = align_multipliers(c, ms);
        double rmin = 0.0, f = 0.0;
        for (int j = 0; j < ms.size(); ++j) {
            rmin = std::max(rmin, std::abs(ms.records[j].sigma * mu[j]));
            f += std::abs(ms.records[j].noise) / ms.records[j].sigma;
        }
        CHECK(rho_min(c, ms) == doctest::Approx(rmin));
        const BoundReport r = error_bound(c, 2.0 * rmin, ms);
        CHECK(r.f_wlav == doctest::Approx(f));
        CHECK(r.zeta_max == doctest::Approx(2.0 * std::sqrt(2.0 * rmin * f / (9.0 * c.lambda))));
        CHECK(r.omega_hat == doctest::Approx(2.0 * std::sqrt(rmin / (9.0 * c.lambda))));
        CHECK_FALSE(r.rho_below_min);
        // doubling rho scales the bound by sqrt 2
        CHECK(error_bound(c, 4.0 * rmin, ms).zeta_max == doctest::Approx(std::sqrt(2.0) * r.zeta_max));
        CHECK(error_bound(c, 0.5 * rmin, ms).rho_below_min);
    }
}
