#include <doctest.h>

#include <cmath>
#include <random>

#include "conicpf/harness.hpp"
#include "conicpf/measurements.hpp"

using namespace conicpf;

namespace {

NetworkCase data_case(const std::string& name) { return load_case(std::string(CONICPF_DATA_DIR) + "/" + name + ".m"); }

// Random connected network with taps, shifts, charging and shunts, ids 1..n.
NetworkCase random_network(int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    NetworkCase net;
    for (int k = 0; k < n; ++k) {
        BusRecord b;
        b.id = k + 1;
        b.kind = k == 0 ? BusKind::slack : BusKind::pq;
        b.shunt_g = 0.02 * u(rng);
        b.shunt_b = 0.1 * (u(rng) - 0.5);
        b.vm = 0.95 + 0.1 * u(rng);
        b.va = 0.3 * (u(rng) - 0.5);
        net.buses.push_back(b);
    }
    auto branch = [&](int f, int t) {
        BranchRecord br;
        br.from = f;
        br.to = t;
        br.r = 0.05 * u(rng);
        br.x = 0.05 + 0.3 * u(rng);
        br.b_charging = 0.05 * u(rng);
        if (u(rng) < 0.3) {
            br.tap = 0.9 + 0.2 * u(rng);
            br.shift = 0.1 * (u(rng) - 0.5);
        }
        net.branches.push_back(br);
    };
    for (int k = 2; k <= n; ++k) branch(1 + static_cast<int>(u(rng) * (k - 1)), k);
    for (int extra = 0; extra < n / 2; ++extra) {
        const int a = 1 + static_cast<int>(u(rng) * n), b = 1 + static_cast<int>(u(rng) * n);
        if (a != b) branch(a, b);
    }
    return net;
}

// Branch terminal currents from the pi model, independent of the library's Yf/Yt.
std::pair<cplx, cplx> branch_currents(const BranchRecord& br, cplx vs, cplx vt) {
    const cplx y = 1.0 / cplx(br.r, br.x);
    const cplx tau = std::polar(br.tap, br.shift);
    const cplx half = cplx(0, br.b_charging / 2);
    const cplx i_from = (y + half) / std::norm(tau) * vs - y / std::conj(tau) * vt;
    const cplx i_to = -y / tau * vs + (y + half) * vt;
    return {i_from, i_to};
}

}  // namespace

TEST_CASE("TB2 real flow matrix and value") {
    const NetworkCase net = *builtin_case("tb2");
    const AdmittanceModel m = build_admittance(net);
    const CoefficientMatrix c = build_matrix(m, {MeasurementKind::p_from, 0});
    // 1/(j0.2) = -5j, so P_12 = Re(v1 conj(y (v1 - v2))) = 5 sin(10 deg)
    CHECK(std::abs(c.matrix.at(0, 1) - cplx(0, 2.5)) < 1e-12);
    CHECK(std::abs(c.matrix.at(0, 0)) < 1e-12);
    CHECK(evaluate(c, net.stored_voltages()) == doctest::Approx(5.0 * std::sin(10.0 * M_PI / 180.0)).epsilon(1e-12));
    CHECK(evaluate(c, net.stored_voltages()) == doctest::Approx(0.86824).epsilon(1e-5));
}

TEST_CASE("voltage measurement is the squared magnitude") {
    const NetworkCase net = *builtin_case("tb2");
    const AdmittanceModel m = build_admittance(net);
    CVector v(2);
    v << cplx(0.95, 0.0), std::polar(1.02, 0.3);
    CHECK(evaluate(build_matrix(m, {MeasurementKind::voltage_sq, 0}), v) == doctest::Approx(0.9025));
    CHECK(evaluate(build_matrix(m, {MeasurementKind::voltage_sq, 1}), v) == doctest::Approx(1.02 * 1.02));
}

TEST_CASE("coefficient matrices reproduce the physical quantities on random networks") {
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 20; ++rep) {
        const NetworkCase net = random_network(2 + rep % 6, rng);
        const AdmittanceModel m = build_admittance(net);
        const CVector v = net.stored_voltages();
        const int n = net.bus_count();
        std::vector<cplx> inj(n, 0.0);
        for (int k = 0; k < n; ++k) {
            const auto& b = net.buses[k];
            inj[k] = v[k] * std::conj(cplx(b.shunt_g, b.shunt_b) * v[k]);
        }
        for (int l = 0; l < net.branch_count(); ++l) {
            const auto& br = net.branches[l];
            const int s = net.bus_index(br.from), t = net.bus_index(br.to);
            const auto [i_f, i_t] = branch_currents(br, v[s], v[t]);
            const cplx s_from = v[s] * std::conj(i_f), s_to = v[t] * std::conj(i_t);
            inj[s] += s_from;
            inj[t] += s_to;
            CHECK(evaluate(build_matrix(m, {MeasurementKind::p_from, l}), v) == doctest::Approx(s_from.real()));
            CHECK(evaluate(build_matrix(m, {MeasurementKind::q_from, l}), v) == doctest::Approx(s_from.imag()));
            CHECK(evaluate(build_matrix(m, {MeasurementKind::p_to, l}), v) == doctest::Approx(s_to.real()));
            CHECK(evaluate(build_matrix(m, {MeasurementKind::q_to, l}), v) == doctest::Approx(s_to.imag()));
        }
        const CVector direct = nodal_injections(m, v);
        for (int k = 0; k < n; ++k) {
            CHECK(evaluate(build_matrix(m, {MeasurementKind::p_inj, k}), v) == doctest::Approx(inj[k].real()));
            CHECK(evaluate(build_matrix(m, {MeasurementKind::q_inj, k}), v) == doctest::Approx(inj[k].imag()));
            CHECK(std::abs(direct[k] - inj[k]) < 1e-10);
        }
    }
}

TEST_CASE("case9 voltage plus tree-flow plan") {
    const NetworkCase net = data_case("case9");
    const AdmittanceModel m = build_admittance(net);
    MeasurementPlan plan;
    plan.tree_flows = spanning_subgraph(net, m, TreeStrategy::min_weight_tree);
    const MeasurementSet set = sample_measurements(m, net.stored_voltages(), plan, NoiseConfig{});
    CHECK(set.size() == 17);
    CHECK(set.kappa() == doctest::Approx(17.0 / 9.0));
    for (int k = 0; k < 9; ++k) CHECK(set.records[k].coeff.descriptor.kind == MeasurementKind::voltage_sq);
    for (const auto& r : set.records) CHECK(r.observed == r.true_value);
}

TEST_CASE("noise scales with the true value and the kind multiplier") {
    const NetworkCase net = data_case("case14");
    const AdmittanceModel m = build_admittance(net);
    MeasurementPlan plan;
    plan.tree_flows = spanning_subgraph(net, m, TreeStrategy::min_weight_tree);
    NoiseConfig noise;
    noise.level = 0.01;
    noise.seed = 3;
    const MeasurementSet set = sample_measurements(m, net.stored_voltages(), plan, noise);
    for (const auto& r : set.records) {
        const double mult = noise.multipliers.for_kind(r.coeff.descriptor.kind);
        CHECK(r.sigma == doctest::Approx(std::max(mult * 0.01 * std::abs(r.true_value), noise.sigma_floor)));
        CHECK(r.observed == doctest::Approx(r.true_value + r.noise));
    }
}

TEST_CASE("uniform bad data corrupts the requested share") {
    const NetworkCase net = data_case("case57");
    const AdmittanceModel m = build_admittance(net);
    MeasurementPlan plan;
    plan.tree_flows = spanning_subgraph(net, m, TreeStrategy::min_weight_tree);
    plan.extra = {{MeasurementKind::p_inj, 0}, {MeasurementKind::p_inj, 1}};
    NoiseConfig noise;
    noise.bad_data.mode = BadDataMode::uniform;
    noise.bad_data.fraction = 0.1;
    noise.seed = 11;
    const MeasurementSet set = sample_measurements(m, net.stored_voltages(), plan, noise);
    REQUIRE(set.size() == 57 + 56 + 2);
    int flagged = 0;
    for (const auto& r : set.records) {
        if (!r.bad_data) {
            CHECK(r.noise == 0.0);
            continue;
        }
        ++flagged;
        CHECK(r.noise >= 0.0);
        CHECK(r.noise <= 2.0);
    }
    CHECK(flagged == static_cast<int>(std::llround(0.1 * set.size())));
}

TEST_CASE("flows_only restricts outliers to branch records") {
    const NetworkCase net = data_case("case14");
    const AdmittanceModel m = build_admittance(net);
    MeasurementPlan plan;
    plan.tree_flows = spanning_subgraph(net, m, TreeStrategy::min_weight_tree);
    NoiseConfig noise;
    noise.bad_data = {BadDataMode::gaussian, 0.5, 0.1, 0.0, 2.0, true};
    const MeasurementSet set = sample_measurements(m, net.stored_voltages(), plan, noise);
    int flagged = 0;
    for (const auto& r : set.records) {
        if (r.bad_data) {
            ++flagged;
            CHECK(is_branch_kind(r.coeff.descriptor.kind));
        }
    }
    CHECK(flagged == 7);
}

TEST_CASE("sampling is reproducible and survives a JSON round trip") {
    const NetworkCase net = data_case("case9");
    const AdmittanceModel m = build_admittance(net);
    MeasurementPlan plan;
    plan.tree_flows = spanning_subgraph(net, m, TreeStrategy::min_weight_tree);
    NoiseConfig noise;
    noise.level = 0.05;
    noise.seed = 99;
    noise.bad_data.mode = BadDataMode::uniform;
    noise.bad_data.fraction = 0.2;
    const MeasurementSet a = sample_measurements(m, net.stored_voltages(), plan, noise);
    const MeasurementSet b = sample_measurements(m, net.stored_voltages(), plan, noise);
    CHECK(a.fingerprint() == b.fingerprint());
    noise.seed = 100;
    CHECK(sample_measurements(m, net.stored_voltages(), plan, noise).fingerprint() != a.fingerprint());

    const MeasurementSet back = measurement_set_from_json(to_json(a), m);
    CHECK(back.fingerprint() == a.fingerprint());
    for (int j = 0; j < a.size(); ++j) {
        CHECK(back.records[j].bad_data == a.records[j].bad_data);
        CHECK(back.records[j].sigma == a.records[j].sigma);
        CHECK(back.records[j].coeff.matrix.at(0, 0) == a.records[j].coeff.matrix.at(0, 0));
    }
}

TEST_CASE("invalid noise settings are rejected") {
    NoiseConfig noise;
    noise.level = -1.0;
    CHECK_THROWS(noise.validate());
    noise.level = 0.1;
    noise.sigma_floor = 0.0;
    CHECK_THROWS(noise.validate());
}
