// akooc: command-line front end for the simulation harness, offline model
// identification, robustness margins, and SVG plotting.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "akooc/bundle.hpp"
#include "akooc/harness.hpp"
#include "akooc/scenario.hpp"
#include "akooc/svg.hpp"

namespace {

akooc::ControllerKind parse_kind(const std::string& name) {
    if (name == "akooc") return akooc::ControllerKind::Akooc;
    if (name == "koopman-linear") return akooc::ControllerKind::KoopmanLinear;
    if (name == "koopman-full-no-ensemble") return akooc::ControllerKind::KoopmanFullNoEnsemble;
    if (name == "pi") return akooc::ControllerKind::Pi;
    if (name == "pi-adaptive") return akooc::ControllerKind::PiAdaptive;
    if (name == "secondary-droop") return akooc::ControllerKind::SecondaryDroop;
    if (name == "none") return akooc::ControllerKind::None;
    throw akooc::ScenarioError("bad controller kind: " + name);
}

std::map<std::string, std::string> read_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw akooc::IoError("cannot open file: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = akooc::detail::trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw akooc::IoError("expected key = value in " + path + ": " + line);
        kv[akooc::detail::trim(line.substr(0, eq))] = akooc::detail::trim(line.substr(eq + 1));
    }
    return kv;
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(akooc::detail::trim(item));
    return out;
}

std::uint64_t file_hash(const std::string& path) {  // FNV-1a over file bytes
    std::ifstream in(path, std::ios::binary);
    if (!in) throw akooc::IoError("cannot open file: " + path);
    std::uint64_t h = 1469598103934665603ull;
    char c;
    while (in.get(c)) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

int cmd_simulate(const std::string& scenario_path, const std::string& controller,
                 std::int64_t seed, const std::string& out_path) {
    akooc::ScenarioSpec spec = akooc::load_scenario(scenario_path);
    if (!controller.empty()) spec.controller.kind = parse_kind(controller);
    if (seed >= 0) spec.seed = static_cast<std::uint64_t>(seed);
    const akooc::Trace trace = akooc::run_scenario(spec);
    std::map<std::string, std::string> manifest;
    manifest["scenario"] = std::filesystem::path(scenario_path).filename().string();
    manifest["scenario_hash"] = std::to_string(file_hash(scenario_path));
    manifest["seed"] = std::to_string(spec.seed);
    manifest["controller"] = controller.empty() ? "scenario-default" : controller;
    akooc::export_trace(trace, out_path, manifest);
    std::cout << "wrote " << trace.records.size() << " records to " << out_path
              << (trace.collapsed ? " (collapsed)" : "") << "\n";
    return trace.collapsed ? 2 : 0;
}

int cmd_identify(const std::string& trace_path, const std::string& learner_path,
                 const std::string& out_path) {
    const akooc::Trace trace = akooc::import_trace(trace_path);
    const auto kv = read_kv_file(learner_path);
    akooc::LearnerParams lp;
    if (kv.count("n")) lp.window = std::stoi(kv.at("n"));
    if (kv.count("gamma")) lp.gamma = std::stod(kv.at("gamma"));
    if (kv.count("n_iter")) lp.n_iter = std::stoi(kv.at("n_iter"));
    if (kv.count("epsilon")) lp.epsilon = std::stod(kv.at("epsilon"));
    const int n = trace.n_der;
    Eigen::MatrixXd B = Eigen::MatrixXd::Identity(2 * n, 2 * n) * trace.ts;
    if (kv.count("b_diag")) {
        const auto vals = split_commas(kv.at("b_diag"));
        if (static_cast<int>(vals.size()) != 2 * n)
            throw akooc::DimensionMismatch("b_diag needs 2*n_der entries");
        B.setZero();
        for (int i = 0; i < 2 * n; ++i) B(i, i) = std::stod(vals[i]);
    }

    std::vector<Eigen::VectorXd> x_hist, u_hist;
    for (const akooc::TraceRecord& r : trace.records) {
        Eigen::VectorXd x(2 * n);
        x.head(n) = r.dtheta_meas;
        x.tail(n) = r.dv_meas;
        x_hist.push_back(x);
        u_hist.push_back(r.u);
    }
    const akooc::KoopmanDataset ds = akooc::assemble_window(x_hist, u_hist, lp.window, trace.ts);
    const akooc::EnsembleModel m = akooc::fit_ensemble(ds, B, lp);

    Eigen::MatrixXd err(1, 1), iters(1, 1);
    err(0, 0) = m.regression_error;
    iters(0, 0) = m.iterations_used;
    akooc::write_bundle({{"A_E", m.A_E},
                         {"A_EM", m.A_EM},
                         {"C_M", m.C_M},
                         {"B_M_hat", m.B_M_hat},
                         {"B", m.B},
                         {"A_C", m.A_C},
                         {"B_C", m.B_C},
                         {"regression_error", err},
                         {"iterations", iters}},
                        out_path);
    std::cout << "fit window N=" << lp.window << ", regression error "
              << akooc::detail::fmt_double(m.regression_error) << ", wrote " << out_path << "\n";
    return 0;
}

int cmd_margins(const std::string& model_path, const std::string& costs_path) {
    const auto mats = akooc::read_bundle(model_path);
    if (!mats.count("A_C") || !mats.count("B_C"))
        throw akooc::IoError("bundle missing A_C/B_C: " + model_path);
    const Eigen::MatrixXd& A = mats.at("A_C");
    const Eigen::MatrixXd& B = mats.at("B_C");
    const int n = static_cast<int>(B.cols()) / 2;
    akooc::LqrCosts costs;
    if (!costs_path.empty()) {
        const auto kv = read_kv_file(costs_path);
        auto get = [&](const char* k, double& dst) {
            if (kv.count(k)) dst = std::stod(kv.at(k));
        };
        get("q_theta", costs.q_theta);
        get("q_v", costs.q_v);
        get("q_sin", costs.q_sin);
        get("q_cos", costs.q_cos);
        get("q_omega", costs.q_omega);
        get("r_p", costs.r_p);
        get("r_q", costs.r_q);
        get("dare_tol", costs.dare_tol);
        if (kv.count("dare_max_iter")) costs.dare_max_iter = std::stoi(kv.at("dare_max_iter"));
    }
    const Eigen::MatrixXd Q = akooc::lifted_cost_matrix(costs, n);
    const Eigen::MatrixXd R = akooc::input_cost_matrix(costs, n);
    const Eigen::MatrixXd S = akooc::solve_dare(A, B, Q, R, costs.dare_tol, costs.dare_max_iter);
    const Eigen::MatrixXd K = akooc::lqr_gain(A, B, S, R);
    const double rho = akooc::closed_loop_spectral_radius(A, B, K);
    const auto margins = akooc::disc_margins(Q, R, K, B, S);
    std::cout << "closed-loop spectral radius " << akooc::detail::fmt_double(rho) << "\n";
    for (size_t i = 0; i < margins.size(); ++i) {
        std::cout << "channel " << i + 1 << ": ";
        if (margins[i].valid)
            std::cout << "G_L=" << akooc::detail::fmt_double(margins[i].lower)
                      << " G_U=" << akooc::detail::fmt_double(margins[i].upper) << "\n";
        else
            std::cout << "undefined (negative discriminant)\n";
    }
    return 0;
}

int cmd_plot(const std::string& trace_path, const std::string& channels,
             const std::string& out_path) {
    const akooc::CsvTable table = akooc::read_csv(trace_path);
    std::vector<akooc::PlotSeries> series;
    for (const std::string& ch : split_commas(channels))
        series.push_back(akooc::channel_series(table, ch, ch));
    if (series.empty()) throw akooc::UnknownChannel("no channels requested");
    akooc::render_plot(series, std::filesystem::path(trace_path).filename().string(), "time [s]",
                       channels, out_path);
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

int cmd_compare(const std::vector<std::string>& traces, const std::string& channel,
                const std::string& out_path) {
    std::vector<akooc::PlotSeries> series;
    for (const std::string& path : traces) {
        const akooc::CsvTable table = akooc::read_csv(path);
        series.push_back(akooc::channel_series(
            table, channel, std::filesystem::path(path).stem().string()));
    }
    akooc::render_plot(series, channel + " comparison", "time [s]", channel, out_path);
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"microgrid secondary-control toolkit"};
    app.require_subcommand(1);

    std::string scenario_path, controller, out_path, trace_path, learner_path, model_path,
        costs_path, channels = "rs", channel = "rs";
    std::int64_t seed = -1;
    std::vector<std::string> traces;

    auto* sim = app.add_subcommand("simulate", "run a scenario and write the trace CSV");
    sim->add_option("--scenario", scenario_path, "scenario file")->required();
    sim->add_option("--controller", controller, "override the scenario's controller kind");
    sim->add_option("--seed", seed, "override the scenario seed");
    sim->add_option("--out", out_path, "output trace CSV")->required();

    auto* ident = app.add_subcommand("identify", "fit a model offline from a trace CSV");
    ident->add_option("--trace", trace_path, "input trace CSV")->required();
    ident->add_option("--learner", learner_path, "learner parameter file")->required();
    ident->add_option("--out", out_path, "output matrix bundle")->required();

    auto* marg = app.add_subcommand("margins", "LQR synthesis and disc gain margins");
    marg->add_option("--model", model_path, "matrix bundle with A_C/B_C")->required();
    marg->add_option("--costs", costs_path, "cost parameter file");

    auto* plot = app.add_subcommand("plot", "render trace channels to SVG");
    plot->add_option("--trace", trace_path, "input trace CSV")->required();
    plot->add_option("--channels", channels, "comma-separated channel names");
    plot->add_option("--out", out_path, "output SVG")->required();

    auto* cmp = app.add_subcommand("compare", "overlay one channel from several traces");
    cmp->add_option("--channel", channel, "channel to overlay");
    cmp->add_option("--out", out_path, "output SVG")->required();
    cmp->add_option("traces", traces, "input trace CSVs")->required()->expected(-1);

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return cmd_simulate(scenario_path, controller, seed, out_path);
        if (ident->parsed()) return cmd_identify(trace_path, learner_path, out_path);
        if (marg->parsed()) return cmd_margins(model_path, costs_path);
        if (plot->parsed()) return cmd_plot(trace_path, channels, out_path);
        if (cmp->parsed()) return cmd_compare(traces, channel, out_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
