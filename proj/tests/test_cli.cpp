#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sktlab/cli.hpp"

using namespace sktlab::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sktlab_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json without_clock(Json r) {
  r.erase("wall_clock_seconds");
  return r;
}

Json small_scalar() {
  return Json::parse(R"({
    "kind": "scalar-model",
    "seed": 5,
    "grid": {"dim": 2, "cells": [8, 8]},
    "time": {"T": 0.25, "steps": 8},
    "params": {"alpha": 1.0, "lambda": 2.0, "theta": 0.5, "ellipticity": 2.0},
    "coefficient": {"type": "oscillatory", "amplitude": 0.3},
    "initial": {"u": {"type": "random", "seed": 9, "low": 0.0, "high": 0.5}},
    "forcing": {"type": "checkerboard"},
    "diagnostics": ["energy", "estimate_ratio", "maximal", "bmo", "level_set"],
    "output": {"fields": true}
  })");
}

Json small_skt() {
  return Json::parse(R"({
    "kind": "skt",
    "seed": 2,
    "grid": {"dim": 2, "cells": [8, 8]},
    "time": {"T": 1.0, "steps": 16},
    "params": {"d1": 0.1, "d2": 0.1, "a11": 0.2, "a12": 0.5, "a22": 0.1, "b2": 0.5, "c1": 0.5},
    "initial": {"u": {"type": "bump", "amplitude": 1.0}, "v": {"type": "random", "seed": 4, "high": 2.0}},
    "diagnostics": ["v_max_over_M0", "mass_gronwall", "blowup_monitor", "gradient_bound"]
  })");
}

int run_binary(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(SKTLAB_BINARY) + " " + args + " > " + log.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  return WEXITSTATUS(raw);
}

}  // namespace

TEST_CASE("scenario normalization round-trips") {
  for (const char* name : {"scalar_bump.json", "skt_flagship.json"}) {
    const auto doc = load_json(fs::path(SKTLAB_CONFIGS) / name);
    const auto sc = parse_scenario(doc);
    const auto again = parse_scenario(sc.doc);
    CHECK(again.doc == sc.doc);
    CHECK(sc.doc.contains("options"));
    CHECK(sc.doc["options"]["p"] == 4.0);
  }
  const auto sc = parse_scenario(small_scalar());
  CHECK(sc.doc["grid"]["lo"] == Json::array({0.0, 0.0}));
  CHECK(sc.doc["picard"]["start"] == "datum");
  CHECK(parse_scenario(sc.doc).doc == sc.doc);
}

TEST_CASE("scenario validation errors carry pointers") {
  auto expect = [](Json doc, const std::string& pointer) {
    try {
      parse_scenario(doc);
      FAIL("expected a ConfigError for " << pointer);
    } catch (const ConfigError& e) {
      CHECK(e.pointer() == pointer);
    }
  };
  Json d = small_scalar();
  d["params"]["theta"] = 1.5;
  expect(d, "/params");
  d = small_scalar();
  d["grid"]["colour"] = 3;
  expect(d, "/grid/colour");
  d = small_scalar();
  d["initial"]["u"].erase("seed");
  expect(d, "/initial/u/seed");
  d = small_scalar();
  d["diagnostics"] = Json::array({"v_max_over_M0"});
  expect(d, "/diagnostics");
  d = small_scalar();
  d["initial"]["u"] = Json{{"type", "constant"}, {"value", 0.9}};  // above 1/lambda
  CHECK_THROWS_AS(parse_scenario(d), ConfigError);
  d = small_skt();
  d["coefficient"] = Json{{"type", "identity"}};
  expect(d, "/coefficient");
  d = small_skt();
  d["params"]["d1"] = 0.0;
  CHECK_THROWS_AS(parse_scenario(d), ConfigError);
}

TEST_CASE("a21 is accepted with a warning") {
  Json d = small_skt();
  d["params"]["a21"] = 0.3;
  const auto sc = parse_scenario(d);
  REQUIRE(sc.warnings.size() == 1);
  CHECK(sc.warnings[0].find("a21") != std::string::npos);
}

TEST_CASE("zero datum run") {
  Json d = small_scalar();
  d["initial"]["u"] = Json{{"type", "constant"}, {"value", 0.0}};
  d["forcing"] = Json{{"type", "constant"}, {"value", 0.0}};
  const auto out = scratch("zero");
  const auto r = run_scenario(parse_scenario(d), out);
  CHECK(r.exit_code == kExitOk);
  CHECK(r.report["status"] == "ok");
  CHECK(r.report["metrics"]["max_u"] == 0.0);
  CHECK(r.report["metrics"]["min_u"] == 0.0);
  for (const auto& inv : r.report["invariants"]) CHECK(inv["pass"] == true);
  CHECK(fs::exists(out / "report.json"));
}

TEST_CASE("runs are deterministic") {
  const auto sc = parse_scenario(small_scalar());
  const auto dir_a = scratch("det_a"), dir_b = scratch("det_b");
  const auto a = run_scenario(sc, dir_a);
  const auto b = run_scenario(sc, dir_b);
  CHECK(without_clock(a.report) == without_clock(b.report));
  CHECK(a.report["diagnostics"].size() == 5);
  REQUIRE(a.report["files"].size() > 2);
  for (const auto& f : a.report["files"]) {
    if (f == "report.json") continue;
    const auto content = slurp(dir_a / f.get<std::string>());
    CHECK(!content.empty());
    CHECK(content == slurp(dir_b / f.get<std::string>()));
  }

  const auto s = parse_scenario(small_skt());
  const auto c = run_scenario(s, scratch("det_c"));
  const auto e = run_scenario(s, scratch("det_e"));
  CHECK(without_clock(c.report) == without_clock(e.report));
}

TEST_CASE("echoed scenario re-validates identically") {
  const auto sc = parse_scenario(small_skt());
  const auto r = run_scenario(sc, scratch("echo"));
  CHECK(parse_scenario(r.report["scenario"]).doc == sc.doc);
}

TEST_CASE("skt run reports the maximum principle ratio") {
  const auto out = scratch("skt");
  const auto r = run_scenario(parse_scenario(small_skt()), out);
  CHECK(r.exit_code == kExitOk);
  CHECK(r.report["diagnostics"]["v_max_over_M0"]["value"].get<double>() <= 1.0 + 1e-10);
  CHECK(fs::exists(out / "monitor.csv"));
  const auto csv = slurp(out / "monitor.csv");
  CHECK(csv.rfind("t,normW1p_u,normW1p_v,min_u,max_u,min_v,max_v,mass_u,mass_v\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 18);
}

TEST_CASE("diagnostics on stored fields") {
  const auto run_dir = scratch("stored_src");
  run_scenario(parse_scenario(small_scalar()), run_dir);
  Json d = Json::parse(R"({"kind": "diagnostics-only",
                           "input": {"stem": "u"},
                           "params": {"lambda": 2.0, "theta": 0.5, "ellipticity": 2.0},
                           "diagnostics": ["norms", "estimate_ratio", "maximal", "level_set", "degiorgi"]})");
  d["input"]["dir"] = (run_dir / "fields").string();
  const auto r = run_scenario(parse_scenario(d), scratch("stored"));
  CHECK(r.report["status"] == "ok");
  CHECK(r.report["metrics"]["cells"] == 64);
  CHECK(r.report["diagnostics"]["norms"]["max"].get<double>() <= 0.5 + 1e-10);
  CHECK(r.report["diagnostics"]["degiorgi"]["exceed_inner"] == 0);

  d["input"]["dir"] = (run_dir / "missing").string();
  CHECK_THROWS(run_scenario(parse_scenario(d), scratch("stored_missing")));
}

TEST_CASE("sweep expansion") {
  Json sweep{{"base", small_scalar()}, {"grid", Json::object()}};
  CHECK_THROWS_AS(expand_sweep(sweep), ConfigError);
  sweep["grid"] = Json{{"/params/theta", Json::array({0.25, 0.5})}, {"/params/lambda", Json::array({0.5, 1.0, 2.0})}};
  const auto points = expand_sweep(sweep);
  REQUIRE(points.size() == 6);
  CHECK(points[0].overrides == Json{{"/params/theta", 0.25}, {"/params/lambda", 0.5}});
  CHECK(points[1].overrides == Json{{"/params/theta", 0.25}, {"/params/lambda", 1.0}});
  CHECK(points[5].scenario.doc["params"]["lambda"] == 2.0);
  sweep["grid"] = Json{{"/params/theta", Json::array()}};
  CHECK_THROWS_AS(expand_sweep(sweep), ConfigError);
  sweep["grid"] = Json{{"/params/theta", Json::array({2.0})}};
  CHECK_THROWS_AS(expand_sweep(sweep), ConfigError);
  const auto seeded = expand_sweep(Json{{"base", small_scalar()}, {"grid", {{"/params/theta", {0.5}}}}}, {}, 77);
  CHECK(seeded[0].scenario.doc["seed"] == 77);
}

TEST_CASE("singleton sweep equals a run") {
  const Json base = small_scalar();
  const Json sweep{{"base", base},
                   {"grid", {{"/params/theta", {0.5}}}},
                   {"aggregate", {{{"name", "ratio"}, {"metric", "/diagnostics/estimate_ratio/ratio"},
                                   {"max_over_median", 10.0}}}}};
  const auto out = scratch("singleton");
  const auto s = run_sweep(sweep, out, 2);
  const auto r = run_scenario(parse_scenario(base), scratch("singleton_run"));
  CHECK(s.exit_code == r.exit_code);
  const auto inner = Json::parse(slurp(out / "scenario_0000" / "report.json"));
  CHECK(without_clock(inner) == without_clock(r.report));
  CHECK(s.report["aggregates"][0]["max_over_median"] == 1.0);
  CHECK(s.report["aggregates"][0]["pass"] == true);
}

TEST_CASE("failing aggregate yields the invariant exit code") {
  const Json sweep{{"base", small_scalar()},
                   {"grid", {{"/initial/u/high", {0.1, 0.5}}}},
                   {"aggregate", {{{"name", "tight"}, {"metric", "/metrics/max_u"}, {"max_over_median", 0.5}}}}};
  const auto s = run_sweep(sweep, scratch("agg"), 1);
  CHECK(s.exit_code == kExitInvariant);
  CHECK(s.report["status"] == "invariant_failure");
  CHECK(s.report["aggregates"][0]["pass"] == false);
}

TEST_CASE("solver aborts are structured failures") {
  Json d = small_scalar();
  d["picard"] = Json{{"max_iterations", 1}, {"l2_tolerance", 1e-300}};
  const auto r = run_scenario(parse_scenario(d), scratch("abort"));
  CHECK(r.exit_code == kExitSolver);
  CHECK(r.report["status"] == "solver_abort");
  CHECK(r.report["failure"]["type"] == "no_convergence");
  CHECK(r.report["failure"]["gaps"].size() == 1);
}

TEST_CASE("ladder report") {
  const auto r = ladder_report(3, 4.0, 6.0, {2.0});
  CHECK(r["terms"] == Json::array({4.0, 16.0}));
  CHECK(r["terminal"] == 2);
  CHECK(r["mu"][0]["mu"].get<double>() < 1.0);
}

TEST_CASE("config errors name the offending line") {
  const auto dir = scratch("lines");
  const auto path = dir / "bad.json";
  Json doc = small_skt();
  doc["bogus"] = 1;
  const std::string text = doc.dump(2);
  std::ofstream(path) << text;
  const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<long>(text.find("\"bogus\"")), '\n');
  try {
    parse_scenario(load_json(path));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.pointer() == "/bogus");
    CHECK(describe(e, path, slurp(path)).find("bad.json:" + std::to_string(line) + ":") != std::string::npos);
  }
  const auto broken = dir / "broken.json";
  std::ofstream(broken) << "{\n  \"kind\": \"skt\",\n  oops\n}\n";
  try {
    load_json(broken);
    FAIL("expected a parse error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("broken.json:3:") != std::string::npos);
  }
}

TEST_CASE("executable exit codes") {
  const auto dir = scratch("binary");
  const auto good = dir / "good.json";
  std::ofstream(good) << small_skt().dump(2);
  CHECK(run_binary("run --config " + good.string() + " --out " + (dir / "out").string(), dir / "log1") == kExitOk);
  CHECK(fs::exists(dir / "out" / "report.json"));
  CHECK(fs::exists(dir / "out" / "monitor.csv"));

  Json bad_doc = small_skt();
  bad_doc["params"]["d2"] = -1.0;
  const auto bad = dir / "bad.json";
  std::ofstream(bad) << bad_doc.dump(2);
  CHECK(run_binary("run --config " + bad.string() + " --out " + (dir / "bad_out").string(), dir / "log2") ==
        kExitConfig);
  CHECK(slurp(dir / "log2").find("error:") != std::string::npos);

  CHECK(run_binary("diagnose --config " + good.string() + " --out " + (dir / "x").string(), dir / "log3") ==
        kExitConfig);
  CHECK(run_binary("ladder --n 5 --l1 4 --p0 6", dir / "log4") == kExitOk);
  CHECK(Json::parse(slurp(dir / "log4"))["terms"][1] == 8.0);

  // --seed changes random profiles, and the same seed reproduces the output.
  CHECK(run_binary("run --config " + good.string() + " --seed 11 --out " + (dir / "s1").string(), dir / "l5") == 0);
  CHECK(run_binary("run --config " + good.string() + " --seed 11 --out " + (dir / "s2").string(), dir / "l6") == 0);
  CHECK(slurp(dir / "s1" / "monitor.csv") == slurp(dir / "s2" / "monitor.csv"));
  CHECK(slurp(dir / "s1" / "monitor.csv") != slurp(dir / "out" / "monitor.csv"));
}
