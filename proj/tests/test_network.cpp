#include <catch_amalgamated.hpp>

#include <complex>
#include <random>
#include <vector>

#include "akooc/network.hpp"

using namespace akooc;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Independent complex-arithmetic injection oracle: S_i = V_i conj(sum_j Y_ij V_j).
std::pair<VectorXd, VectorXd> injections_oracle(const VectorXd& V, const VectorXd& th,
                                                const NetworkModel& net) {
    const int n = net.n_bus;
    VectorXd P(n), Q(n);
    for (int i = 0; i < n; ++i) {
        std::complex<double> acc(0.0, 0.0);
        const std::complex<double> vi = std::polar(V(i), th(i));
        for (int j = 0; j < n; ++j) {
            const std::complex<double> yij(net.G(i, j), net.B(i, j));
            acc += yij * std::polar(V(j), th(j));
        }
        const std::complex<double> s = vi * std::conj(acc);
        P(i) = s.real();
        Q(i) = s.imag();
    }
    return {P, Q};
}

// Random connected network: spanning tree plus a few extra branches.
NetworkModel random_network(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> imp(0.01, 0.2);
    std::uniform_int_distribution<int> pick(0, n - 1);
    std::vector<Line> lines;
    for (int i = 1; i < n; ++i) {
        std::uniform_int_distribution<int> parent(0, i - 1);
        lines.push_back({parent(rng), i, imp(rng), imp(rng)});
    }
    const int extra = n / 3;
    for (int e = 0; e < extra; ++e) {
        int a = pick(rng), b = pick(rng);
        if (a != b) lines.push_back({a, b, imp(rng), imp(rng)});
    }
    std::vector<BusRole> roles(n, BusRole::Load);
    roles[0] = BusRole::Der;
    return build_admittance(lines, roles);
}

}  // namespace

TEST_CASE("admittance stamping matches the closed form for one line") {
    const double r = 0.02, x = 0.08;
    const double z2 = r * r + x * x;
    NetworkModel net = build_admittance({{0, 1, r, x}}, {BusRole::Der, BusRole::Load});
    const double g = r / z2, b = -x / z2;
    CHECK(net.G(0, 0) == Catch::Approx(g).margin(1e-15));
    CHECK(net.G(1, 1) == Catch::Approx(g).margin(1e-15));
    CHECK(net.G(0, 1) == Catch::Approx(-g).margin(1e-15));
    CHECK(net.B(0, 0) == Catch::Approx(b).margin(1e-15));
    CHECK(net.B(0, 1) == Catch::Approx(-b).margin(1e-15));
}

TEST_CASE("admittance matrices are symmetric on random networks") {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 20; ++t) {
        std::uniform_int_distribution<int> nb(2, 10);
        NetworkModel net = random_network(rng, nb(rng));
        CHECK((net.G - net.G.transpose()).cwiseAbs().maxCoeff() == 0.0);
        CHECK((net.B - net.B.transpose()).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("shunts stamp only the bus diagonal") {
    NetworkModel base = build_admittance({{0, 1, 0.01, 0.03}}, {BusRole::Der, BusRole::Load});
    NetworkModel with = build_admittance({{0, 1, 0.01, 0.03}}, {BusRole::Der, BusRole::Load},
                                         {{1, 0.5, -2.0}});
    CHECK(with.G(1, 1) == Catch::Approx(base.G(1, 1) + 0.5));
    CHECK(with.B(1, 1) == Catch::Approx(base.B(1, 1) - 2.0));
    CHECK(with.G(0, 1) == base.G(0, 1));
    CHECK(with.B(0, 0) == base.B(0, 0));
}

TEST_CASE("admittance construction rejects bad inputs") {
    CHECK_THROWS_AS(build_admittance({{0, 1, 0.0, 0.0}}, {BusRole::Der, BusRole::Load}),
                    ZeroImpedanceLine);
    CHECK_THROWS_AS(build_admittance({{0, 3, 0.01, 0.03}}, {BusRole::Der, BusRole::Load}),
                    DimensionMismatch);
    // Bus 2 has no branch.
    CHECK_THROWS_AS(
        build_admittance({{0, 1, 0.01, 0.03}}, {BusRole::Der, BusRole::Load, BusRole::Load}),
        IslandedBusDetected);
    // An out-of-service line does not connect its endpoints.
    CHECK_THROWS_AS(build_admittance({{0, 1, 0.01, 0.03}, {1, 2, 0.01, 0.03, false}},
                                     {BusRole::Der, BusRole::Load, BusRole::Load}),
                    IslandedBusDetected);
}

TEST_CASE("injections match the complex-power oracle") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> vmag(0.9, 1.1), ang(-0.3, 0.3);
    for (int t = 0; t < 20; ++t) {
        std::uniform_int_distribution<int> nb(2, 10);
        NetworkModel net = random_network(rng, nb(rng));
        VectorXd V(net.n_bus), th(net.n_bus);
        for (int i = 0; i < net.n_bus; ++i) {
            V(i) = vmag(rng);
            th(i) = ang(rng);
        }
        auto [P, Q] = injections(V, th, net);
        auto [Po, Qo] = injections_oracle(V, th, net);
        CHECK((P - Po).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((Q - Qo).cwiseAbs().maxCoeff() < 1e-12);
    }
    NetworkModel net = random_network(rng, 3);
    CHECK_THROWS_AS(injections(VectorXd::Ones(2), VectorXd::Zero(3), net), DimensionMismatch);
}

TEST_CASE("analytic Jacobian matches central finite differences") {
    std::mt19937_64 rng(37);
    std::uniform_real_distribution<double> vmag(0.9, 1.1), ang(-0.3, 0.3);
    const double h = 1e-6;
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
        std::uniform_int_distribution<int> nb(2, 10);
        const int n = nb(rng);
        NetworkModel net = random_network(rng, n);
        VectorXd V(n), th(n);
        for (int i = 0; i < n; ++i) {
            V(i) = vmag(rng);
            th(i) = ang(rng);
        }
        const MatrixXd J = power_flow_jacobian(V, th, net);
        MatrixXd Jfd(2 * n, 2 * n);
        for (int c = 0; c < 2 * n; ++c) {
            VectorXd Vp = V, Vm = V, tp = th, tm = th;
            if (c < n) {
                tp(c) += h;
                tm(c) -= h;
            } else {
                Vp(c - n) += h;
                Vm(c - n) -= h;
            }
            auto [Pp, Qp] = injections(Vp, tp, net);
            auto [Pm, Qm] = injections(Vm, tm, net);
            Jfd.col(c).head(n) = (Pp - Pm) / (2.0 * h);
            Jfd.col(c).tail(n) = (Qp - Qm) / (2.0 * h);
        }
        worst = std::max(worst, (J - Jfd).cwiseAbs().maxCoeff());
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("power flow converges and satisfies the boundary conditions") {
    NetworkModel net = build_admittance(
        {{0, 1, 0.01, 0.05}, {1, 2, 0.02, 0.06}, {0, 2, 0.015, 0.07}},
        {BusRole::Der, BusRole::Load, BusRole::Load});
    PowerFlowBoundary bd;
    bd.fixed = {true, false, false};
    bd.V_fixed = VectorXd::Ones(3);
    bd.theta_fixed = VectorXd::Zero(3);
    bd.P_load = VectorXd::Zero(3);
    bd.Q_load = VectorXd::Zero(3);
    bd.P_load(1) = 0.4;
    bd.Q_load(1) = 0.1;
    bd.P_load(2) = 0.2;
    BusSolution sol = solve_power_flow(net, bd, BusSolution{});
    CHECK(sol.V(0) == 1.0);
    CHECK(sol.theta(0) == 0.0);
    // Free-bus injections balance the demand within the solver tolerance.
    CHECK(std::abs(sol.P_inj(1) + 0.4) < 1e-8);
    CHECK(std::abs(sol.Q_inj(1) + 0.1) < 1e-8);
    CHECK(std::abs(sol.P_inj(2) + 0.2) < 1e-8);
    // Recomputed injections agree with the reported ones.
    auto [P, Q] = injections(sol.V, sol.theta, net);
    CHECK((P - sol.P_inj).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((Q - sol.Q_inj).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("power flow reports non-convergence on infeasible demand") {
    NetworkModel net = build_admittance({{0, 1, 0.01, 0.05}}, {BusRole::Der, BusRole::Load});
    PowerFlowBoundary bd;
    bd.fixed = {true, false};
    bd.V_fixed = VectorXd::Ones(2);
    bd.theta_fixed = VectorXd::Zero(2);
    bd.P_load = VectorXd::Zero(2);
    bd.Q_load = VectorXd::Zero(2);
    bd.P_load(1) = 500.0;  // far beyond the line's transfer capacity
    CHECK_THROWS_AS(solve_power_flow(net, bd, BusSolution{}), Error);
}
