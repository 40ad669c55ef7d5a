#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "akooc/baselines.hpp"
#include "akooc/control.hpp"
#include "akooc/errors.hpp"
#include "akooc/koopman.hpp"
#include "akooc/network.hpp"
#include "akooc/plant.hpp"
#include "akooc/scenario.hpp"
#include "akooc/telemetry.hpp"

namespace akooc {

/// Root-mean-square restoration index over the controlled DERs:
/// sqrt((|dv|^2 + |domega|^2) / (2 N)).
inline double compute_rs(const Eigen::VectorXd& dv, const Eigen::VectorXd& domega) {
    if (dv.size() != domega.size()) throw DimensionMismatch("compute_rs");
    const double n = static_cast<double>(dv.size());
    if (n == 0.0) return 0.0;
    return std::sqrt((dv.squaredNorm() + domega.squaredNorm()) / (2.0 * n));
}

/// One row per secondary tick.
struct TraceRecord {
    double t = 0.0;
    Eigen::VectorXd dtheta;       // rad, bus angle truth per controlled DER
    Eigen::VectorXd dv;           // p.u., bus voltage deviation truth
    Eigen::VectorXd domega;       // p.u. frequency deviation truth
    Eigen::VectorXd dtheta_meas;  // after noise + imputation
    Eigen::VectorXd dv_meas;
    Eigen::VectorXd u;            // applied [dP*; dQ*] issued this tick
    double rs = 0.0;
    StepDiagnostics diag;
    // Lagged one-step prediction errors of the competing model fits,
    // populated when predictor comparison is on.
    double pred_ensemble = std::numeric_limits<double>::quiet_NaN();
    double pred_linear = std::numeric_limits<double>::quiet_NaN();
    double pred_full = std::numeric_limits<double>::quiet_NaN();
};

struct Trace {
    int n_der = 0;
    double ts = 0.0;
    bool has_predictions = false;
    bool collapsed = false;
    double collapse_time = std::numeric_limits<double>::quiet_NaN();
    std::vector<TraceRecord> records;
};

namespace detail {

struct PendingCommand {
    double apply_time = 0.0;
    Eigen::VectorXd u;             // reference update (empty for droop offsets)
    double droop_omega = 0.0;      // secondary-droop offsets
    Eigen::VectorXd droop_v;
};

struct PendingPrediction {
    bool valid = false;
    Eigen::VectorXd x_ens, x_lin, x_full;
};

}  // namespace detail

/// Quasi-static two-rate co-simulation of a scenario: forward-Euler primary
/// dynamics at dt with an algebraic network solve every substep, and the
/// secondary telemetry/learning/control loop every ts. Returns the secondary
/// tick trace; a plant collapse (power flow breakdown or voltage floor)
/// truncates the run and flags the trace.
inline Trace run_scenario(const ScenarioSpec& spec) {
    const int n_bus = static_cast<int>(spec.bus_roles.size());
    std::vector<int> der_of_bus(n_bus, -1);
    for (size_t i = 0; i < spec.ders.size(); ++i) der_of_bus[spec.ders[i].bus] = static_cast<int>(i);
    for (int b = 0; b < n_bus; ++b) {
        if (spec.bus_roles[b] == BusRole::Der && der_of_bus[b] < 0)
            throw ScenarioError("DER bus " + std::to_string(b) + " has no unit attached");
    }
    std::vector<int> ctl;  // controlled DER indices, telemetry/control ordering
    for (size_t i = 0; i < spec.ders.size(); ++i)
        if (spec.ders[i].controlled) ctl.push_back(static_cast<int>(i));
    const int n_ctl = static_cast<int>(ctl.size());
    if (n_ctl == 0) throw ScenarioError("no controlled DERs");

    std::vector<Line> lines = spec.lines;
    std::vector<Shunt> shunts;
    NetworkModel net = build_admittance(lines, spec.bus_roles);

    // Plant state.
    std::vector<DerState> ders(spec.ders.size());
    std::vector<RefOffsets> offs(spec.ders.size());
    for (size_t i = 0; i < spec.ders.size(); ++i) {
        ders[i].theta = spec.ders[i].cfg.theta_ref;
        ders[i].v = spec.ders[i].cfg.v_ref;
    }
    std::vector<LoadConfig> loads = spec.loads;
    std::vector<LoadState> load_states(loads.size());
    for (size_t i = 0; i < loads.size(); ++i) {
        load_states[i].xp = loads[i].p0;
        load_states[i].xq = loads[i].q0;
    }

    auto make_boundary = [&](const Eigen::VectorXd& amb_th, const Eigen::VectorXd& amb_v) {
        PowerFlowBoundary bd;
        bd.fixed.assign(n_bus, false);
        bd.V_fixed = Eigen::VectorXd::Ones(n_bus);
        bd.theta_fixed = Eigen::VectorXd::Zero(n_bus);
        bd.P_load = Eigen::VectorXd::Zero(n_bus);
        bd.Q_load = Eigen::VectorXd::Zero(n_bus);
        for (int b = 0; b < n_bus; ++b) {
            if (spec.bus_roles[b] == BusRole::Slack) bd.fixed[b] = true;
            if (spec.bus_roles[b] == BusRole::Der) {
                bd.fixed[b] = true;
                const DerState& s = ders[der_of_bus[b]];
                bd.V_fixed(b) = s.v;
                bd.theta_fixed(b) = s.theta;
            }
        }
        for (int k = 0; k < n_ctl; ++k) {
            const int b = spec.ders[ctl[k]].bus;
            bd.theta_fixed(b) += amb_th(k);
            bd.V_fixed(b) += amb_v(k);
        }
        for (size_t i = 0; i < loads.size(); ++i) {
            bd.P_load(loads[i].bus) += load_states[i].xp;
            bd.Q_load(loads[i].bus) += load_states[i].xq;
        }
        return bd;
    };

    Eigen::VectorXd amb_th = Eigen::VectorXd::Zero(n_ctl);
    Eigen::VectorXd amb_v = Eigen::VectorXd::Zero(n_ctl);

    // Equilibrium initialization: solve at the flat DER start, settle the
    // voltage-dependent loads at the solved voltages, re-solve, then zero the
    // droop errors by seeding the filters and references with the solution.
    BusSolution sol = solve_power_flow(net, make_boundary(amb_th, amb_v), BusSolution{});
    for (size_t i = 0; i < loads.size(); ++i)
        dynamic_load_step(load_states[i], sol.V(loads[i].bus), loads[i], 1e30);
    sol = solve_power_flow(net, make_boundary(amb_th, amb_v), sol);
    Eigen::VectorXd p_base(spec.ders.size()), q_base(spec.ders.size());
    for (size_t i = 0; i < spec.ders.size(); ++i) {
        const int b = spec.ders[i].bus;
        ders[i].p_filt = sol.P_inj(b);
        ders[i].q_filt = sol.Q_inj(b);
        ders[i].p_star = ders[i].p_filt;
        ders[i].q_star = ders[i].q_filt;
        p_base(i) = ders[i].p_star;
        q_base(i) = ders[i].q_star;
    }

    // Secondary machinery.
    const int n_sub = static_cast<int>(std::llround(spec.ts / spec.dt));
    const int n_steps = static_cast<int>(std::llround(spec.duration / spec.dt));
    std::mt19937_64 rng_tel(spec.telemetry.rng_seed ? spec.telemetry.rng_seed : spec.seed + 1);
    std::mt19937_64 rng_amb(spec.seed + 2);
    std::normal_distribution<double> amb_th_dist(0.0, spec.ambient.theta_std);
    std::normal_distribution<double> amb_v_dist(0.0, spec.ambient.v_std);
    std::normal_distribution<double> wiener(0.0, spec.ambient.wiener_std);

    std::vector<DerConfig> ctl_cfgs;
    for (int k : ctl) ctl_cfgs.push_back(spec.ders[k].cfg);
    const Eigen::MatrixXd B_phys =
        physical_model_matrices(ctl_cfgs, Eigen::MatrixXd::Zero(2 * n_ctl, 2 * n_ctl), spec.ts)
            .B;

    const ControllerSpec& cs = spec.controller;
    KoopmanLqrController koop(cs.kind, n_ctl, B_phys, spec.learner, cs.costs, spec.ts);
    PiController pi(cs.pi, n_ctl);
    SecondaryDroopController sdroop(cs.droop, n_ctl);
    const bool is_koopman = cs.kind == ControllerKind::Akooc ||
                            cs.kind == ControllerKind::KoopmanLinear ||
                            cs.kind == ControllerKind::KoopmanFullNoEnsemble;

    bool secondary_enabled = true;
    for (const Event& ev : spec.events)
        if (ev.kind == EventKind::EnableSecondary) secondary_enabled = false;

    std::vector<Eigen::VectorXd> x_hist, u_hist;
    std::deque<detail::PendingCommand> queue;
    std::vector<std::pair<double, Event>> pending_clears;
    detail::PendingPrediction pending_pred;
    size_t next_event = 0;

    Trace trace;
    trace.n_der = n_ctl;
    trace.ts = spec.ts;
    trace.has_predictions = cs.compare_predictors;

    Eigen::VectorXd prev_dtheta = Eigen::VectorXd::Zero(n_ctl);
    bool have_prev_tick = false;

    auto collapse = [&](double t) {
        trace.collapsed = true;
        trace.collapse_time = t;
    };

    for (int step = 0; step <= n_steps; ++step) {
        const double t = step * spec.dt;
        bool topology_changed = false;

        while (next_event < spec.events.size() && spec.events[next_event].t <= t + 0.5 * spec.dt) {
            const Event& ev = spec.events[next_event++];
            switch (ev.kind) {
                case EventKind::LoadStep:
                    if (ev.load < 0 || ev.load >= static_cast<int>(loads.size()))
                        throw ScenarioError("event load index out of range");
                    if (ev.bus == -2) {  // relative scaling
                        loads[ev.load].p0 *= ev.dp;
                        loads[ev.load].q0 *= ev.dq;
                    } else {
                        loads[ev.load].p0 += ev.dp;
                        loads[ev.load].q0 += ev.dq;
                    }
                    break;
                case EventKind::LineTrip:
                    if (ev.line < 0 || ev.line >= static_cast<int>(lines.size()))
                        throw ScenarioError("event line index out of range");
                    lines[ev.line].in_service = false;
                    topology_changed = true;
                    break;
                case EventKind::FaultAndClear:
                    shunts.push_back({ev.bus, ev.shunt_g, ev.shunt_b});
                    pending_clears.emplace_back(ev.t_clear, ev);
                    topology_changed = true;
                    break;
                case EventKind::EnableSecondary:
                    secondary_enabled = true;
                    break;
            }
        }
        for (auto it = pending_clears.begin(); it != pending_clears.end();) {
            if (it->first <= t + 0.5 * spec.dt) {
                const Event& ev = it->second;
                std::erase_if(shunts, [&](const Shunt& s) {
                    return s.bus == ev.bus && s.g == ev.shunt_g && s.b == ev.shunt_b;
                });
                if (ev.line >= 0) lines[ev.line].in_service = false;
                topology_changed = true;
                it = pending_clears.erase(it);
            } else {
                ++it;
            }
        }
        if (topology_changed) {
            try {
                net = build_admittance(lines, spec.bus_roles, shunts);
            } catch (const Error&) {
                collapse(t);
                break;
            }
        }

        while (!queue.empty() && queue.front().apply_time <= t + 0.5 * spec.dt) {
            const detail::PendingCommand& cmd = queue.front();
            if (cmd.u.size() > 0) {
                const ReferenceMode mode = cs.kind == ControllerKind::Pi
                                               ? ReferenceMode::FixedBaseline
                                               : ReferenceMode::Adaptive;
                for (int k = 0; k < n_ctl; ++k) {
                    const int i = ctl[k];
                    apply_reference_update(ders[i], cmd.u(k), cmd.u(n_ctl + k), mode, p_base(i),
                                           q_base(i));
                }
            } else {
                for (int k = 0; k < n_ctl; ++k) {
                    offs[ctl[k]].omega = cmd.droop_omega;
                    offs[ctl[k]].v = cmd.droop_v(k);
                }
            }
            queue.pop_front();
        }

        if (spec.ambient.wiener_std > 0.0) {
            for (LoadConfig& lc : loads) {
                lc.p0 += wiener(rng_amb);
                lc.q0 += wiener(rng_amb);
            }
        }
        for (size_t i = 0; i < loads.size(); ++i)
            dynamic_load_step(load_states[i], sol.V(loads[i].bus), loads[i], spec.dt);

        try {
            sol = solve_power_flow(net, make_boundary(amb_th, amb_v), sol);
        } catch (const Error&) {
            collapse(t);
            break;
        }
        if (sol.V.minCoeff() < 0.1 || sol.V.maxCoeff() > 3.0 || !sol.V.allFinite()) {
            collapse(t);
            break;
        }

        for (size_t i = 0; i < spec.ders.size(); ++i) {
            const int b = spec.ders[i].bus;
            lowpass_filter_step(sol.P_inj(b), sol.Q_inj(b), ders[i], spec.ders[i].cfg.lowpass_tau,
                                spec.dt);
        }

        if (step % n_sub == 0) {
            // Secondary tick: measure, learn, decide. Reported truth channels
            // come from the DER internal state; the telemetry path sees the
            // bus phasor including the held ambient reference perturbation.
            TraceRecord rec;
            rec.t = t;
            rec.dtheta.resize(n_ctl);
            rec.dv.resize(n_ctl);
            rec.domega.resize(n_ctl);
            Eigen::VectorXd bus_truth(2 * n_ctl);
            for (int k = 0; k < n_ctl; ++k) {
                const DerSpec& d = spec.ders[ctl[k]];
                rec.dtheta(k) = ders[ctl[k]].theta - d.cfg.theta_ref;
                rec.dv(k) = ders[ctl[k]].v - 1.0;
                bus_truth(k) = rec.dtheta(k) + amb_th(k);
                bus_truth(n_ctl + k) = rec.dv(k) + amb_v(k);
            }
            rec.domega = have_prev_tick
                             ? ((rec.dtheta - prev_dtheta) / (spec.ts * kTwoPi)).eval()
                             : Eigen::VectorXd::Zero(n_ctl);
            prev_dtheta = rec.dtheta;
            have_prev_tick = true;
            rec.rs = compute_rs(rec.dv, rec.domega);
            // Colored (first-order) ambient jitter, held over the secondary
            // period; phi/scale keep the stationary std at the configured level.
            const double phi = spec.ambient.tau > 0.0 ? std::exp(-spec.ts / spec.ambient.tau) : 0.0;
            const double mix = std::sqrt(std::max(0.0, 1.0 - phi * phi));
            for (int k = 0; k < n_ctl; ++k) {
                amb_th(k) = spec.ambient.theta_std > 0.0
                                ? phi * amb_th(k) + mix * amb_th_dist(rng_amb)
                                : 0.0;
                amb_v(k) = spec.ambient.v_std > 0.0 ? phi * amb_v(k) + mix * amb_v_dist(rng_amb)
                                                    : 0.0;
            }

            Eigen::VectorXd meas = sample_pmu(bus_truth, spec.telemetry.noise_std, rng_tel);
            meas = impute_missing(meas, spec.telemetry.missing, n_ctl, rng_tel);
            rec.dtheta_meas = meas.head(n_ctl);
            rec.dv_meas = meas.tail(n_ctl);
            x_hist.push_back(meas);

            // Score the predictions issued at the previous tick.
            if (cs.compare_predictors && pending_pred.valid) {
                rec.pred_ensemble = prediction_error(meas, pending_pred.x_ens);
                rec.pred_linear = prediction_error(meas, pending_pred.x_lin);
                rec.pred_full = prediction_error(meas, pending_pred.x_full);
                pending_pred.valid = false;
            }

            Eigen::VectorXd u = Eigen::VectorXd::Zero(2 * n_ctl);
            StepDiagnostics diag;
            diag.warmup = true;
            if (is_koopman) {
                u = koop.step(x_hist, u_hist, diag);
            } else if (cs.kind == ControllerKind::Pi || cs.kind == ControllerKind::PiAdaptive) {
                Eigen::VectorXd dom_meas = Eigen::VectorXd::Zero(n_ctl);
                if (x_hist.size() >= 2) {
                    const Eigen::VectorXd& prev = x_hist[x_hist.size() - 2];
                    dom_meas = (rec.dtheta_meas - prev.head(n_ctl)) / (spec.ts * kTwoPi);
                }
                u = pi.step(dom_meas, rec.dv_meas, spec.ts);
                diag.warmup = false;
            } else if (cs.kind == ControllerKind::SecondaryDroop) {
                Eigen::VectorXd dom_meas = Eigen::VectorXd::Zero(n_ctl);
                if (x_hist.size() >= 2) {
                    const Eigen::VectorXd& prev = x_hist[x_hist.size() - 2];
                    dom_meas = (rec.dtheta_meas - prev.head(n_ctl)) / (spec.ts * kTwoPi);
                }
                sdroop.step(dom_meas, rec.dv_meas, spec.ts);
                diag.warmup = false;
            }

            if (!secondary_enabled) u.setZero();
            if (!diag.fail_reason.empty() && std::getenv("AKOOC_DEBUG"))
                std::fprintf(stderr, "t=%.2f design failed: %s\n", t, diag.fail_reason.c_str());
            rec.u = u;
            rec.diag = diag;
            u_hist.push_back(u);

            if (secondary_enabled) {
                detail::PendingCommand cmd;
                cmd.apply_time = t + sample_delay(spec.telemetry, rng_tel);
                if (cs.kind == ControllerKind::SecondaryDroop) {
                    cmd.droop_omega = sdroop.omega_offset();
                    cmd.droop_v = sdroop.v_offsets();
                } else if (cs.kind != ControllerKind::None) {
                    cmd.u = u;
                }
                if (cmd.u.size() > 0 || cs.kind == ControllerKind::SecondaryDroop)
                    queue.push_back(cmd);
            }

            if (cs.compare_predictors &&
                static_cast<int>(x_hist.size()) >= spec.learner.window + 1) {
                try {
                    const KoopmanDataset ds =
                        assemble_window(x_hist, u_hist, spec.learner.window, spec.ts);
                    const Eigen::VectorXd& xk = x_hist.back();
                    const Eigen::VectorXd zk = embed(xk, x_hist[x_hist.size() - 2], spec.ts);
                    // All three predictors are refit on the same fresh window
                    // so the comparison isolates the model structure.
                    const EnsembleModel m_ens = fit_ensemble(ds, B_phys, spec.learner);
                    pending_pred.x_ens = predict_one_step(m_ens, xk, zk, u);
                    const Eigen::MatrixXd A_lin = fit_linear_only(ds, B_phys, spec.learner.ridge);
                    pending_pred.x_lin = A_lin * xk + B_phys * u;
                    auto [A_full, B_full] = fit_full_no_ensemble(ds, spec.learner.ridge);
                    Eigen::VectorXd chi(5 * n_ctl);
                    chi.head(2 * n_ctl) = xk;
                    chi.tail(3 * n_ctl) = zk;
                    pending_pred.x_full = (A_full * chi + B_full * u).head(2 * n_ctl);
                    pending_pred.valid = true;
                } catch (const Error&) {
                    pending_pred.valid = false;
                }
            }

            trace.records.push_back(std::move(rec));
        }

        for (size_t i = 0; i < spec.ders.size(); ++i) {
            if (spec.ders[i].cfg.droop_kind == DroopKind::Conventional)
                droop_conventional_step(ders[i], spec.ders[i].cfg, spec.dt, offs[i]);
            else
                droop_modified_step(ders[i], spec.ders[i].cfg, spec.dt, offs[i]);
        }
    }

    return trace;
}

// --- trace CSV I/O ---------------------------------------------------------

namespace detail {

inline std::string fmt_double(double v) {
    char buf[48];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

}  // namespace detail

/// Write the secondary-tick trace as CSV (header + shortest-round-trip
/// doubles) plus a key=value sidecar manifest at <path>.manifest.
inline void export_trace(const Trace& trace, const std::string& path,
                         const std::map<std::string, std::string>& manifest = {}) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open trace output: " + path);
    const int n = trace.n_der;
    // Per-step wall-clock time is deliberately not a CSV column: trace files
    // must be byte-reproducible for a given (scenario, seed), and wall time is
    // not. A mean lands in the manifest sidecar instead.
    out << "time_s,rs,regression_error,spectral_radius,learner_iterations,fallback,warmup";
    for (int k = 1; k <= n; ++k) out << ",dtheta_der" << k;
    for (int k = 1; k <= n; ++k) out << ",dv_der" << k;
    for (int k = 1; k <= n; ++k) out << ",domega_der" << k;
    for (int k = 1; k <= n; ++k) out << ",dtheta_meas_der" << k;
    for (int k = 1; k <= n; ++k) out << ",dv_meas_der" << k;
    for (int k = 1; k <= n; ++k) out << ",up_der" << k;
    for (int k = 1; k <= n; ++k) out << ",uq_der" << k;
    if (trace.has_predictions) out << ",pred_ensemble,pred_linear,pred_full";
    out << "\n";
    for (const TraceRecord& r : trace.records) {
        using detail::fmt_double;
        out << fmt_double(r.t) << ',' << fmt_double(r.rs) << ','
            << fmt_double(r.diag.regression_error) << ',' << fmt_double(r.diag.spectral_radius)
            << ',' << r.diag.learner_iterations << ',' << (r.diag.fallback ? 1 : 0) << ','
            << (r.diag.warmup ? 1 : 0);
        for (int k = 0; k < n; ++k) out << ',' << fmt_double(r.dtheta(k));
        for (int k = 0; k < n; ++k) out << ',' << fmt_double(r.dv(k));
        for (int k = 0; k < n; ++k) out << ',' << fmt_double(r.domega(k));
        for (int k = 0; k < n; ++k) out << ',' << fmt_double(r.dtheta_meas(k));
        for (int k = 0; k < n; ++k) out << ',' << fmt_double(r.dv_meas(k));
        for (int k = 0; k < n; ++k) out << ',' << fmt_double(r.u(k));
        for (int k = 0; k < n; ++k) out << ',' << fmt_double(r.u(n + k));
        if (trace.has_predictions)
            out << ',' << fmt_double(r.pred_ensemble) << ',' << fmt_double(r.pred_linear) << ','
                << fmt_double(r.pred_full);
        out << "\n";
    }
    if (!out) throw IoError("short write: " + path);

    std::ofstream mf(path + ".manifest");
    if (!mf) throw IoError("cannot open manifest: " + path + ".manifest");
    mf << "n_der=" << n << "\n";
    mf << "ts=" << detail::fmt_double(trace.ts) << "\n";
    mf << "collapsed=" << (trace.collapsed ? 1 : 0) << "\n";
    if (trace.collapsed) mf << "collapse_time=" << detail::fmt_double(trace.collapse_time) << "\n";
    {
        double sum = 0.0;
        size_t cnt = 0;
        for (const TraceRecord& r : trace.records)
            if (!r.diag.warmup) {
                sum += r.diag.wall_ms;
                ++cnt;
            }
        mf << "mean_step_ms=" << detail::fmt_double(cnt ? sum / static_cast<double>(cnt) : 0.0)
           << "\n";
    }
    for (const auto& [k, v] : manifest) mf << k << "=" << v << "\n";
}

/// Generic columnar CSV: header names to value vectors, preserving order.
struct CsvTable {
    std::vector<std::string> columns;
    std::map<std::string, std::vector<double>> data;

    const std::vector<double>& col(const std::string& name) const {
        auto it = data.find(name);
        if (it == data.end()) throw UnknownChannel(name);
        return it->second;
    }
    bool has(const std::string& name) const { return data.count(name) > 0; }
    size_t rows() const { return columns.empty() ? 0 : data.at(columns.front()).size(); }
};

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open CSV: " + path);
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty CSV: " + path);
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            table.columns.push_back(cell);
            table.data[cell] = {};
        }
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        size_t c = 0;
        while (std::getline(ss, cell, ',')) {
            if (c >= table.columns.size()) throw IoError("ragged CSV row in " + path);
            double v = std::numeric_limits<double>::quiet_NaN();
            if (cell != "nan" && cell != "-nan" && !cell.empty())
                std::from_chars(cell.data(), cell.data() + cell.size(), v);
            table.data[table.columns[c]].push_back(v);
            ++c;
        }
        if (c != table.columns.size()) throw IoError("ragged CSV row in " + path);
    }
    return table;
}

/// Reconstruct a Trace from an exported CSV (column layout as export_trace).
inline Trace import_trace(const std::string& path) {
    const CsvTable t = read_csv(path);
    Trace trace;
    int n = 0;
    while (t.has("dtheta_der" + std::to_string(n + 1))) ++n;
    if (n == 0) throw IoError("not a trace CSV: " + path);
    trace.n_der = n;
    trace.has_predictions = t.has("pred_ensemble");
    const size_t rows = t.rows();
    if (rows >= 2) trace.ts = t.col("time_s")[1] - t.col("time_s")[0];
    for (size_t r = 0; r < rows; ++r) {
        TraceRecord rec;
        rec.t = t.col("time_s")[r];
        rec.rs = t.col("rs")[r];
        rec.diag.regression_error = t.col("regression_error")[r];
        rec.diag.spectral_radius = t.col("spectral_radius")[r];
        rec.diag.learner_iterations = static_cast<int>(t.col("learner_iterations")[r]);
        rec.diag.fallback = t.col("fallback")[r] != 0.0;
        rec.diag.warmup = t.col("warmup")[r] != 0.0;
        rec.dtheta.resize(n);
        rec.dv.resize(n);
        rec.domega.resize(n);
        rec.dtheta_meas.resize(n);
        rec.dv_meas.resize(n);
        rec.u.resize(2 * n);
        for (int k = 0; k < n; ++k) {
            const std::string sfx = "_der" + std::to_string(k + 1);
            rec.dtheta(k) = t.col("dtheta" + sfx)[r];
            rec.dv(k) = t.col("dv" + sfx)[r];
            rec.domega(k) = t.col("domega" + sfx)[r];
            rec.dtheta_meas(k) = t.col("dtheta_meas" + sfx)[r];
            rec.dv_meas(k) = t.col("dv_meas" + sfx)[r];
            rec.u(k) = t.col("up" + sfx)[r];
            rec.u(n + k) = t.col("uq" + sfx)[r];
        }
        if (trace.has_predictions) {
            rec.pred_ensemble = t.col("pred_ensemble")[r];
            rec.pred_linear = t.col("pred_linear")[r];
            rec.pred_full = t.col("pred_full")[r];
        }
        trace.records.push_back(std::move(rec));
    }
    return trace;
}

}  // namespace akooc
