#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "akooc/baselines.hpp"
#include "akooc/control.hpp"
#include "akooc/errors.hpp"
#include "akooc/koopman.hpp"
#include "akooc/network.hpp"
#include "akooc/plant.hpp"
#include "akooc/telemetry.hpp"

namespace akooc {

enum class EventKind { LoadStep, LineTrip, FaultAndClear, EnableSecondary };

struct Event {
    double t = 0.0;
    EventKind kind = EventKind::EnableSecondary;
    int load = -1;       // load index (load-step)
    double dp = 0.0;     // p.u. (load-step)
    double dq = 0.0;     // p.u. (load-step)
    int line = -1;       // line index (line-trip, fault clearing)
    int bus = -1;        // faulted bus
    double t_clear = 0.0;
    double shunt_g = 0.0;  // fault shunt stamped during the fault
    double shunt_b = 0.0;
};

struct DerSpec {
    int bus = -1;
    DerConfig cfg;
    bool controlled = true;  // false: stiff generator, not commanded
};

struct AmbientSpec {
    double theta_std = 0.0;   // rad, stationary std of the DER angle reference jitter
    double v_std = 0.0;       // p.u., stationary std of the DER voltage reference jitter
    double tau = 0.3;         // s, correlation time of the jitter (first-order colored)
    double wiener_std = 0.0;  // p.u., load P/Q Gaussian increment per primary step
};

struct ControllerSpec {
    ControllerKind kind = ControllerKind::None;
    LqrCosts costs;
    PiConfig pi;
    SecondaryDroopConfig droop;
    bool compare_predictors = false;
};

struct ScenarioSpec {
    double s_base_kva = 1.0;
    double v_base_v = 1.0;
    double f_base_hz = 60.0;
    double dt = 1e-3;
    double ts = 0.06;
    double duration = 1.0;
    std::uint64_t seed = 0;
    std::vector<BusRole> bus_roles;
    std::vector<Line> lines;
    std::vector<DerSpec> ders;
    std::vector<LoadConfig> loads;
    TelemetryConfig telemetry;
    LearnerParams learner;
    ControllerSpec controller;
    AmbientSpec ambient;
    std::vector<Event> events;
};

namespace detail {

using Record = std::map<std::string, std::string>;

inline std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline double to_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ScenarioError("bad number for '" + key + "': " + v);
    }
}

inline int to_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const int i = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::exception&) {
        throw ScenarioError("bad integer for '" + key + "': " + v);
    }
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ScenarioError("bad boolean for '" + key + "': " + v);
}

/// Parse "{ k = v, k = v }" into a record.
inline Record parse_record(const std::string& key, const std::string& body) {
    Record rec;
    std::string inner = trim(body);
    if (inner.size() < 2 || inner.front() != '{' || inner.back() != '}')
        throw ScenarioError("expected { ... } record for '" + key + "'");
    inner = inner.substr(1, inner.size() - 2);
    std::stringstream ss(inner);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        const size_t eq = item.find('=');
        if (eq == std::string::npos)
            throw ScenarioError("expected k = v inside record for '" + key + "'");
        rec[trim(item.substr(0, eq))] = trim(item.substr(eq + 1));
    }
    return rec;
}

struct RecordReader {
    std::string owner;
    Record rec;
    std::set<std::string> used;

    bool has(const std::string& k) {
        if (rec.count(k)) {
            used.insert(k);
            return true;
        }
        return false;
    }
    std::string str(const std::string& k) {
        if (!has(k)) throw ScenarioError(owner + ": missing key '" + k + "'");
        return rec.at(k);
    }
    std::string str_or(const std::string& k, const std::string& dflt) {
        return has(k) ? rec.at(k) : dflt;
    }
    double num(const std::string& k) { return to_double(k, str(k)); }
    double num_or(const std::string& k, double dflt) {
        return has(k) ? to_double(k, rec.at(k)) : dflt;
    }
    int integer(const std::string& k) { return to_int(k, str(k)); }
    int integer_or(const std::string& k, int dflt) {
        return has(k) ? to_int(k, rec.at(k)) : dflt;
    }
    bool boolean_or(const std::string& k, bool dflt) {
        return has(k) ? to_bool(k, rec.at(k)) : dflt;
    }
    void finish() const {
        for (const auto& [k, v] : rec) {
            if (!used.count(k)) throw ScenarioError(owner + ": unknown key '" + k + "'");
        }
    }
};

}  // namespace detail

/// Parse the scenario text format: [section] headers, key = value lines,
/// repeated record keys with inline { ... } bodies. Unknown keys are errors.
inline ScenarioSpec parse_scenario(std::istream& in) {
    using namespace detail;
    ScenarioSpec spec;
    std::string section;
    std::string line;
    int line_no = 0;

    std::map<int, BusRole> roles;
    std::vector<std::pair<std::string, double>> controller_keys;
    std::string controller_kind = "none";
    bool compare_predictors = false;

    auto scalar_error = [&](const std::string& key) {
        throw ScenarioError("unknown key '" + key + "' in section [" + section + "]");
    };

    while (std::getline(in, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ScenarioError("bad section header: " + line);
            section = line.substr(1, line.size() - 2);
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ScenarioError("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        if (section == "system") {
            if (key == "s_base_kva") spec.s_base_kva = to_double(key, value);
            else if (key == "v_base_v") spec.v_base_v = to_double(key, value);
            else if (key == "f_base_hz") spec.f_base_hz = to_double(key, value);
            else scalar_error(key);
        } else if (section == "timing") {
            if (key == "dt") spec.dt = to_double(key, value);
            else if (key == "ts") spec.ts = to_double(key, value);
            else if (key == "duration") spec.duration = to_double(key, value);
            else if (key == "seed") spec.seed = static_cast<std::uint64_t>(to_int(key, value));
            else scalar_error(key);
        } else if (section == "network") {
            if (key == "bus") {
                RecordReader r{"bus", parse_record(key, value), {}};
                const int id = r.integer("id");
                const std::string role = r.str("role");
                r.finish();
                if (role == "der") roles[id] = BusRole::Der;
                else if (role == "load") roles[id] = BusRole::Load;
                else if (role == "slack") roles[id] = BusRole::Slack;
                else throw ScenarioError("bad bus role: " + role);
            } else if (key == "line") {
                RecordReader r{"line", parse_record(key, value), {}};
                Line ln;
                ln.from = r.integer("from");
                ln.to = r.integer("to");
                ln.r = r.num("r");
                ln.x = r.num("x");
                ln.in_service = r.boolean_or("in_service", true);
                r.finish();
                spec.lines.push_back(ln);
            } else {
                scalar_error(key);
            }
        } else if (section == "ders") {
            if (key != "der") scalar_error(key);
            RecordReader r{"der", parse_record(key, value), {}};
            DerSpec d;
            d.bus = r.integer("bus");
            const std::string droop = r.str("droop");
            if (droop == "conventional") d.cfg.droop_kind = DroopKind::Conventional;
            else if (droop == "modified") d.cfg.droop_kind = DroopKind::Modified;
            else throw ScenarioError("bad droop kind: " + droop);
            // Gains may be given in engineering units (converted to p.u. on the
            // declared bases) or directly in p.u.
            if (r.has("sigma_omega_hz_per_w"))
                d.cfg.sigma_omega_pu = to_double("sigma_omega_hz_per_w",
                                                 r.rec.at("sigma_omega_hz_per_w")) *
                                       spec.s_base_kva * 1e3 / spec.f_base_hz;
            d.cfg.sigma_omega_pu = r.num_or("sigma_omega_pu", d.cfg.sigma_omega_pu);
            if (r.has("sigma_v_v_per_var"))
                d.cfg.sigma_v_pu =
                    to_double("sigma_v_v_per_var", r.rec.at("sigma_v_v_per_var")) *
                    spec.s_base_kva * 1e3 / spec.v_base_v;
            d.cfg.sigma_v_pu = r.num_or("sigma_v_pu", d.cfg.sigma_v_pu);
            d.cfg.sigma_theta = r.num_or("sigma_theta", 0.0);
            d.cfg.tau_theta = r.num_or("tau_theta", 1.0);
            d.cfg.tau_v = r.num_or("tau_v", 1.0);
            d.cfg.v_ref = r.num_or("v_ref", 1.0);
            d.cfg.theta_ref = r.num_or("theta_ref", 0.0);
            d.cfg.lowpass_tau = r.num_or("lowpass_tau", 0.0318);
            d.controlled = r.boolean_or("controlled", true);
            r.finish();
            spec.ders.push_back(d);
        } else if (section == "loads") {
            if (key != "load") scalar_error(key);
            RecordReader r{"load", parse_record(key, value), {}};
            LoadConfig lc;
            lc.bus = r.integer("bus");
            lc.p0 = r.num_or("p_kw", 0.0) / spec.s_base_kva;
            lc.q0 = r.num_or("q_kvar", 0.0) / spec.s_base_kva;
            lc.p0 = r.num_or("p_pu", lc.p0);
            lc.q0 = r.num_or("q_pu", lc.q0);
            lc.alpha_p = r.num_or("alpha_p", 0.0);
            lc.alpha_q = r.num_or("alpha_q", 0.0);
            lc.tau = r.num_or("tau", 0.0);
            lc.v0 = r.num_or("v0", 1.0);
            r.finish();
            spec.loads.push_back(lc);
        } else if (section == "telemetry") {
            if (key == "noise_std") spec.telemetry.noise_std = to_double(key, value);
            else if (key == "delay_mean") spec.telemetry.delay_mean = to_double(key, value);
            else if (key == "delay_std") spec.telemetry.delay_std = to_double(key, value);
            else if (key == "seed")
                spec.telemetry.rng_seed = static_cast<std::uint64_t>(to_int(key, value));
            else if (key == "missing") {
                RecordReader r{"missing", parse_record(key, value), {}};
                ImputationRule rule;
                rule.missing = r.integer("der");
                rule.neighbor_a = r.integer("neighbor_a");
                rule.neighbor_b = r.integer("neighbor_b");
                r.finish();
                spec.telemetry.missing.push_back(rule);
            } else scalar_error(key);
        } else if (section == "learner") {
            if (key == "n") spec.learner.window = to_int(key, value);
            else if (key == "gamma") spec.learner.gamma = to_double(key, value);
            else if (key == "n_iter") spec.learner.n_iter = to_int(key, value);
            else if (key == "epsilon") spec.learner.epsilon = to_double(key, value);
            else if (key == "ridge") spec.learner.ridge = to_double(key, value);
            else if (key == "l_max") spec.learner.l_max = to_int(key, value);
            else scalar_error(key);
        } else if (section == "controller") {
            if (key == "kind") controller_kind = value;
            else if (key == "compare_predictors") compare_predictors = to_bool(key, value);
            else controller_keys.emplace_back(key, to_double(key, value));
        } else if (section == "ambient") {
            if (key == "theta_std") spec.ambient.theta_std = to_double(key, value);
            else if (key == "v_std") spec.ambient.v_std = to_double(key, value);
            else if (key == "tau") spec.ambient.tau = to_double(key, value);
            else if (key == "wiener_std") spec.ambient.wiener_std = to_double(key, value);
            else scalar_error(key);
        } else if (section == "events") {
            if (key != "event") scalar_error(key);
            RecordReader r{"event", parse_record(key, value), {}};
            Event ev;
            ev.t = r.num("t");
            const std::string kind = r.str("kind");
            if (kind == "load-step") {
                ev.kind = EventKind::LoadStep;
                ev.load = r.integer("load");
                ev.dp = r.num_or("dp_kw", 0.0) / spec.s_base_kva;
                ev.dq = r.num_or("dq_kvar", 0.0) / spec.s_base_kva;
                ev.dp = r.num_or("dp_pu", ev.dp);
                ev.dq = r.num_or("dq_pu", ev.dq);
            } else if (kind == "load-scale") {
                ev.kind = EventKind::LoadStep;
                ev.load = r.integer("load");
                ev.dp = r.num("factor");  // relative scaling, resolved at apply time
                ev.dq = ev.dp;
                ev.bus = -2;  // marks relative scaling
            } else if (kind == "line-trip") {
                ev.kind = EventKind::LineTrip;
                ev.line = r.integer("line");
            } else if (kind == "fault") {
                ev.kind = EventKind::FaultAndClear;
                ev.bus = r.integer("bus");
                ev.t_clear = r.num("t_clear");
                ev.line = r.integer_or("line", -1);
                ev.shunt_g = r.num_or("shunt_g", 0.0);
                ev.shunt_b = r.num_or("shunt_b", 0.0);
            } else if (kind == "enable-secondary") {
                ev.kind = EventKind::EnableSecondary;
            } else {
                throw ScenarioError("bad event kind: " + kind);
            }
            r.finish();
            spec.events.push_back(ev);
        } else {
            throw ScenarioError("unknown section [" + section + "]");
        }
    }

    // Controller keys resolved once the kind is known.
    ControllerSpec& c = spec.controller;
    c.compare_predictors = compare_predictors;
    if (controller_kind == "akooc") c.kind = ControllerKind::Akooc;
    else if (controller_kind == "koopman-linear") c.kind = ControllerKind::KoopmanLinear;
    else if (controller_kind == "koopman-full-no-ensemble")
        c.kind = ControllerKind::KoopmanFullNoEnsemble;
    else if (controller_kind == "pi") c.kind = ControllerKind::Pi;
    else if (controller_kind == "pi-adaptive") c.kind = ControllerKind::PiAdaptive;
    else if (controller_kind == "secondary-droop") c.kind = ControllerKind::SecondaryDroop;
    else if (controller_kind == "none") c.kind = ControllerKind::None;
    else throw ScenarioError("bad controller kind: " + controller_kind);
    for (const auto& [k, v] : controller_keys) {
        if (k == "q_theta") c.costs.q_theta = v;
        else if (k == "q_v") c.costs.q_v = v;
        else if (k == "q_sin") c.costs.q_sin = v;
        else if (k == "q_cos") c.costs.q_cos = v;
        else if (k == "q_omega") c.costs.q_omega = v;
        else if (k == "r_p") c.costs.r_p = v;
        else if (k == "r_q") c.costs.r_q = v;
        else if (k == "u_bound") { c.costs.u_bound = v; c.pi.clamp = v; }
        else if (k == "dare_tol") c.costs.dare_tol = v;
        else if (k == "dare_max_iter") c.costs.dare_max_iter = static_cast<int>(v);
        else if (k == "eps_q") c.costs.eps_q = v;
        else if (k == "kp_f") c.pi.kp_f = v;
        else if (k == "ki_f") c.pi.ki_f = v;
        else if (k == "kp_v") c.pi.kp_v = v;
        else if (k == "ki_v") c.pi.ki_v = v;
        else if (k == "k_omega") c.droop.k_omega = v;
        else if (k == "k_v") c.droop.k_v = v;
        else throw ScenarioError("unknown key '" + k + "' in section [controller]");
    }

    // Assemble bus roles from the sparse id map.
    int n_bus = 0;
    for (const auto& [id, role] : roles) n_bus = std::max(n_bus, id + 1);
    spec.bus_roles.assign(n_bus, BusRole::Load);
    std::set<int> seen;
    for (const auto& [id, role] : roles) {
        spec.bus_roles[id] = role;
        seen.insert(id);
    }
    if (static_cast<int>(seen.size()) != n_bus)
        throw ScenarioError("bus ids must cover 0..n-1 without gaps");
    for (const DerSpec& d : spec.ders) {
        if (d.bus < 0 || d.bus >= n_bus || spec.bus_roles[d.bus] == BusRole::Load)
            throw ScenarioError("der attached to non-DER bus " + std::to_string(d.bus));
    }
    for (const LoadConfig& l : spec.loads) {
        if (l.bus < 0 || l.bus >= n_bus) throw ScenarioError("load bus out of range");
    }
    // Events sorted by time; Ts an integer multiple of dt.
    for (size_t i = 1; i < spec.events.size(); ++i) {
        if (spec.events[i].t < spec.events[i - 1].t)
            throw ScenarioError("events must be sorted by time");
    }
    const double ratio = spec.ts / spec.dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-9)
        throw ScenarioError("ts must be an integer multiple of dt");
    return spec;
}

inline ScenarioSpec load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scenario file: " + path);
    return parse_scenario(in);
}

}  // namespace akooc
