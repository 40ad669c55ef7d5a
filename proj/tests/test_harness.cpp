#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "akooc/bundle.hpp"
#include "akooc/harness.hpp"
#include "akooc/svg.hpp"

using namespace akooc;
using Eigen::VectorXd;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

ScenarioSpec parse_text(const std::string& text) {
    std::istringstream in(text);
    return parse_scenario(in);
}

const char* kTinyScenario = R"(
[system]
s_base_kva = 10.0
v_base_v = 480.0
[timing]
dt = 0.001
ts = 0.06
duration = 0.6
seed = 1
[network]
bus = { id = 0, role = der }
bus = { id = 1, role = der }
bus = { id = 2, role = load }
line = { from = 0, to = 2, r = 0.01, x = 0.05 }
line = { from = 1, to = 2, r = 0.01, x = 0.05 }
[ders]
der = { bus = 0, droop = conventional, sigma_omega_pu = 0.02, sigma_v_pu = 0.05 }
der = { bus = 1, droop = conventional, sigma_omega_pu = 0.02, sigma_v_pu = 0.05 }
[loads]
load = { bus = 2, p_kw = 2.0, q_kvar = 1.0 }
[controller]
kind = none
)";

Trace small_trace() {
    Trace tr;
    tr.n_der = 1;
    tr.ts = 0.06;
    for (int k = 0; k < 3; ++k) {
        TraceRecord r;
        r.t = 0.06 * k;
        r.dtheta = VectorXd::Constant(1, 0.01 * k);
        r.dv = VectorXd::Constant(1, -0.002 * k);
        r.domega = VectorXd::Constant(1, 0.1 * k);
        r.dtheta_meas = r.dtheta;
        r.dv_meas = r.dv;
        r.u = VectorXd::Constant(2, 0.03);
        r.rs = compute_rs(r.dv, r.domega);
        tr.records.push_back(r);
    }
    return tr;
}

}  // namespace

TEST_CASE("restoration index arithmetic") {
    CHECK(compute_rs(VectorXd::Zero(3), VectorXd::Zero(3)) == 0.0);
    CHECK(compute_rs(VectorXd::Constant(2, 0.1), VectorXd::Constant(2, 0.1)) ==
          Catch::Approx(0.1));
    VectorXd dv(2), dom(2);
    dv << 1.0, 0.0;
    dom << 0.0, 0.0;
    CHECK(compute_rs(dv, dom) == Catch::Approx(0.5));
    CHECK_THROWS_AS(compute_rs(VectorXd::Zero(2), VectorXd::Zero(3)), DimensionMismatch);
}

TEST_CASE("scenario parser fails fast on malformed input") {
    CHECK_THROWS_AS(parse_text("[timing]\nfoo = 3\n"), ScenarioError);
    CHECK_THROWS_AS(parse_text("[bogus]\nx = 1\n"), ScenarioError);
    CHECK_THROWS_AS(parse_text("[timing]\ndt = 0.001\nts = 0.0015\n"), ScenarioError);
    CHECK_THROWS_AS(parse_text("[events]\n"
                               "event = { t = 2.0, kind = enable-secondary }\n"
                               "event = { t = 1.0, kind = enable-secondary }\n"),
                    ScenarioError);
    CHECK_THROWS_AS(parse_text("[network]\nbus = { id = 0, role = widget }\n"), ScenarioError);
    CHECK_THROWS_AS(parse_text("[network]\nbus = { id = 0, role = load }\n"
                               "bus = { id = 2, role = load }\n"),
                    ScenarioError);
    CHECK_THROWS_AS(parse_text("[network]\nbus = { id = 0, role = load }\n"
                               "[ders]\nder = { bus = 0, droop = conventional }\n"),
                    ScenarioError);
    CHECK_THROWS_AS(
        parse_text("[network]\nline = { from = 0, to = 1, r = 0.1, x = 0.1, zz = 1 }\n"),
        ScenarioError);
    CHECK_THROWS_AS(parse_text("[controller]\nkind = bogus\n"), ScenarioError);
    CHECK_THROWS_AS(parse_text("[timing]\ndt = banana\n"), ScenarioError);
}

TEST_CASE("shipped small scenario parses with the expected shape") {
    const ScenarioSpec spec = load_scenario(AKOOC_SOURCE_DIR "/scenarios/four-bus.scn");
    CHECK(spec.bus_roles.size() == 7);
    CHECK(spec.lines.size() == 7);
    CHECK(spec.ders.size() == 4);
    CHECK(spec.loads.size() == 3);
    CHECK(spec.events.size() == 2);
    CHECK(spec.controller.kind == ControllerKind::Akooc);
    CHECK(spec.learner.window == 10);
    CHECK(spec.ts == 0.06);
    // Engineering-unit droop gains are converted onto the declared bases.
    CHECK(spec.ders[0].cfg.sigma_omega_pu ==
          Catch::Approx(3.4e-4 * spec.s_base_kva * 1e3 / spec.f_base_hz));
    CHECK(spec.ders[0].cfg.sigma_v_pu ==
          Catch::Approx(1.0e-3 * spec.s_base_kva * 1e3 / spec.v_base_v));
}

TEST_CASE("equilibrium is preserved without noise, ambient input, or events") {
    const ScenarioSpec spec = parse_text(kTinyScenario);
    const Trace tr = run_scenario(spec);
    REQUIRE(tr.records.size() > 5);
    CHECK_FALSE(tr.collapsed);
    for (const TraceRecord& r : tr.records) {
        CHECK(r.dtheta.cwiseAbs().maxCoeff() < 1e-6);
        CHECK(r.dv.cwiseAbs().maxCoeff() < 1e-6);
        CHECK(r.domega.cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("same spec and seed give byte-identical trace files") {
    std::string text(kTinyScenario);
    text +=
        "[telemetry]\n"
        "noise_std = 0.003\n"
        "delay_mean = 0.01\n"
        "delay_std = 0.002\n"
        "[ambient]\n"
        "theta_std = 0.005\n"
        "v_std = 0.005\n"
        "wiener_std = 0.00001\n";
    ScenarioSpec spec = parse_text(text);
    spec.controller.kind = ControllerKind::PiAdaptive;
    spec.controller.pi = {1.0, 2.0, 1.0, 2.0, 0.1};
    const std::string p1 = tmp_path("akooc_det_a.csv");
    const std::string p2 = tmp_path("akooc_det_b.csv");
    export_trace(run_scenario(spec), p1);
    export_trace(run_scenario(spec), p2);
    CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("trace RS column is self-consistent with the deviation columns") {
    const ScenarioSpec spec = parse_text(kTinyScenario);
    const Trace tr = run_scenario(spec);
    for (const TraceRecord& r : tr.records)
        CHECK(r.rs == Catch::Approx(compute_rs(r.dv, r.domega)).margin(1e-15));
}

TEST_CASE("trace CSV round-trips byte-identically") {
    const Trace tr = small_trace();
    const std::string p1 = tmp_path("akooc_rt_a.csv");
    const std::string p2 = tmp_path("akooc_rt_b.csv");
    export_trace(tr, p1, {{"note", "roundtrip"}});
    const Trace back = import_trace(p1);
    REQUIRE(back.records.size() == tr.records.size());
    CHECK(back.n_der == tr.n_der);
    export_trace(back, p2, {{"note", "roundtrip"}});
    CHECK(slurp(p1) == slurp(p2));
    // The sidecar manifest carries the run metadata.
    const std::string mf = slurp(p1 + ".manifest");
    CHECK(mf.find("n_der=1") != std::string::npos);
    CHECK(mf.find("note=roundtrip") != std::string::npos);
}

TEST_CASE("empty trace exports a header-only CSV") {
    Trace tr;
    tr.n_der = 0;
    const std::string p = tmp_path("akooc_empty.csv");
    export_trace(tr, p);
    const std::string body = slurp(p);
    CHECK(body.find("time_s,rs,") == 0);
    CHECK(std::count(body.begin(), body.end(), '\n') == 1);
}

TEST_CASE("CSV reader rejects unknown channels and missing files") {
    const std::string p = tmp_path("akooc_chan.csv");
    export_trace(small_trace(), p);
    const CsvTable t = read_csv(p);
    CHECK(t.has("dv_der1"));
    CHECK_THROWS_AS(t.col("dv_der9"), UnknownChannel);
    CHECK_THROWS_AS(read_csv(tmp_path("akooc_does_not_exist.csv")), IoError);
}

TEST_CASE("plots contain one polyline per unbroken series segment") {
    PlotSeries s1{"alpha", {0, 1, 2, 3, 4}, {0.0, 1.0, 0.5, 1.5, 1.0}};
    PlotSeries s2{"beta",
                  {0, 1, 2, 3, 4},
                  {1.0, std::numeric_limits<double>::quiet_NaN(), 0.7, 0.6, 0.5}};
    const std::string p = tmp_path("akooc_plot.svg");
    render_plot({s1, s2}, "panel", "time [s]", "value", p);
    const std::string svg = slurp(p);
    CHECK(svg.rfind("<svg", 0) == 0);
    size_t n_poly = 0, pos = 0;
    while ((pos = svg.find("<polyline", pos)) != std::string::npos) {
        ++n_poly;
        ++pos;
    }
    CHECK(n_poly == 3);  // one for s1, two segments around the NaN for s2
    CHECK(svg.find(">alpha<") != std::string::npos);
    CHECK(svg.find(">beta<") != std::string::npos);
    CHECK_THROWS_AS(render_plot({}, "t", "x", "y", p), IoError);
    // Channel extraction enforces known names.
    const std::string pc = tmp_path("akooc_chan2.csv");
    export_trace(small_trace(), pc);
    const CsvTable t = read_csv(pc);
    CHECK_THROWS_AS(channel_series(t, "nope", "nope"), UnknownChannel);
}

TEST_CASE("matrix bundles round-trip") {
    Eigen::MatrixXd a(2, 3);
    a << 1, 2, 3, 4, 5, 6.5;
    Eigen::MatrixXd b(1, 1);
    b << -0.125;
    const std::string p = tmp_path("akooc_bundle.txt");
    write_bundle({{"A_C", a}, {"K", b}}, p);
    const auto mats = read_bundle(p);
    REQUIRE(mats.count("A_C") == 1);
    REQUIRE(mats.count("K") == 1);
    CHECK((mats.at("A_C") - a).cwiseAbs().maxCoeff() == 0.0);
    CHECK(mats.at("K")(0, 0) == -0.125);
    CHECK_THROWS_AS(read_bundle(tmp_path("akooc_missing_bundle.txt")), IoError);
}
