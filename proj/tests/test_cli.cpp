#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"

using namespace umlr;
using namespace umlr::cli;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("umlr_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name, const std::string& content = "") const {
    const auto p = (path / name).string();
    if (!content.empty()) std::ofstream(p) << content;
    return p;
  }
};

std::string slurp(const std::string& p) {
  std::ifstream in(p);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kIo;
}

Settings small_sim() {
  return {{"n", "120"}, {"p", "8"}, {"s", "3"}, {"reps", "10"}, {"lambda", "0.5"},
          {"ci", "false"}, {"seed", "7"}, {"threads", "1"}};
}

}  // namespace

TEST_CASE("load_csv: minimal file and column selection") {
  TempDir dir;
  const auto p = dir.file("a.csv", "y,t,x1\n1.5,0,2\n2.5,1,3\n0.5,0,-1\n");
  auto l = load_csv(p, "y", "t", {});
  CHECK(l.data.n() == 3);
  CHECK(l.data.p() == 1);
  CHECK(l.covariates == std::vector<std::string>{"x1"});
  CHECK(l.data.y()[1] == 2.5);
  CHECK(l.data.t()[1] == 1);

  const auto q = dir.file("b.csv", "x2,t,x1,y\n1,0,2,5\n3,1,4,6\n");
  l = load_csv(q, "y", "t", {"x1"});
  CHECK(l.data.p() == 1);
  CHECK(l.data.x()(1, 0) == 4.0);
  l = load_csv(q, "y", "t", {"all-others"});
  CHECK(l.covariates == std::vector<std::string>{"x2", "x1"});
}

TEST_CASE("load_csv: errors name the row and column") {
  TempDir dir;
  const auto bad_t = dir.file("t.csv", "y,t,x1\n1,0,1\n2,2,1\n");
  try {
    load_csv(bad_t, "y", "t", {});
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidInput);
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }
  const auto bad_x = dir.file("x.csv", "y,t,x1\n1,0,1\n2,1,abc\n");
  try {
    load_csv(bad_x, "y", "t", {});
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kParse);
    const std::string msg = e.what();
    CHECK(msg.find("row 2") != std::string::npos);
    CHECK(msg.find("'x1'") != std::string::npos);
  }
  CHECK(code_of([&] { load_csv(bad_x, "y", "treat", {}); }) == ErrorCode::kParse);
  CHECK(code_of([&] { load_csv(dir.file("none.csv"), "y", "t", {}); }) == ErrorCode::kParse);
  const auto ragged = dir.file("r.csv", "y,t,x1\n1,0\n");
  CHECK(code_of([&] { load_csv(ragged, "y", "t", {}); }) == ErrorCode::kParse);
}

TEST_CASE("config text: comments, whitespace, unknown keys") {
  const auto s = parse_config_text("# header\nn = 50  # inline\n\nlearner=lasso\n");
  CHECK(s.at("n") == "50");
  CHECK(s.at("learner") == "lasso");
  CHECK(code_of([] { parse_config_text("nope = 1\n"); }) == ErrorCode::kConfig);
  CHECK(code_of([] { parse_config_text("just text\n"); }) == ErrorCode::kConfig);
}

TEST_CASE("resolve_config: defaults, types, required keys") {
  const auto c = resolve_config("simulate", {{"n", "300"}});
  CHECK(c["n"] == 300);
  CHECK(c["p"] == 200);
  CHECK(c["seed"] == 0);
  CHECK(c["sigma"].is_number_float());
  CHECK(c["ci"] == true);
  CHECK(code_of([] { resolve_config("simulate", {{"n", "abc"}}); }) == ErrorCode::kConfig);
  CHECK(code_of([] { resolve_config("estimate", {}); }) == ErrorCode::kConfig);
  CHECK(code_of([] { resolve_config("simulate", {{"bogus", "1"}}); }) == ErrorCode::kConfig);
}

TEST_CASE("simulate: one summary row per estimator and mode, reproducible from the report") {
  TempDir dir;
  Settings s = small_sim();
  s["estimator"] = "t";
  s["learner"] = "gbt";
  s["gbt-trees"] = "10";
  s["out"] = dir.file("r.json");
  s["records-csv"] = dir.file("rec.csv");
  const auto out = run("simulate", s);
  const auto& results = out.report["results"];
  REQUIRE(results.size() == 2);
  CHECK(results[0]["mode"] == "mlr");
  CHECK(results[1]["mode"] == "umlr");
  CHECK(out.report["schema"] == "umlr-report/v1");
  CHECK(out.report["config"]["seed"] == 7);
  CHECK(out.report["metadata"].contains("timestamp"));
  CHECK(fs::exists(s["out"]));

  std::istringstream lines(slurp(s["records-csv"]));
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) ++count;
  CHECK(count == 1 + 10 * 2);

  Settings replay = settings_from_report(nlohmann::json::parse(slurp(s["out"])));
  replay["out"] = dir.file("r2.json");
  replay["records-csv"] = "";
  const auto again = run("simulate", replay);
  CHECK(again.report["results"].dump() == out.report["results"].dump());
  CHECK(again.report["diagnostics"].dump() == out.report["diagnostics"].dump());
}

TEST_CASE("estimate: exported synthetic cohort, psm row tagged ATT") {
  TempDir dir;
  Settings s = small_sim();
  s["n"] = "200";
  s["export-data"] = dir.file("cohort.csv");
  s["out"] = dir.file("sim.json");
  run("simulate", s);

  Settings e{{"data", dir.file("cohort.csv")}, {"estimator", "s,t,x,psm"}, {"mode", "umlr"},
             {"lambda", "0.5"}, {"bootstrap", "50"}, {"out", dir.file("est.json")},
             {"summary-csv", dir.file("est.csv")}};
  const auto out = run("estimate", e);
  const auto& rows = out.report["results"];
  REQUIRE(rows.size() == 4);
  CHECK(rows[3]["estimand"] == "ATT");
  CHECK(rows[0]["estimand"] == "ATE");
  CHECK(out.report["input"]["rows"] == 200);
  CHECK(out.report["input"]["covariates"].size() == 8);
  CHECK(out.report["diagnostics"]["models"].size() >= 3);
  for (const auto& r : rows) {
    CHECK(r["ci_low"].get<double>() <= r["point"].get<double>());
    CHECK(r["point"].get<double>() <= r["ci_high"].get<double>());
  }
  CHECK(slurp(dir.file("est.csv")).find("psm_att") != std::string::npos);
}

TEST_CASE("diagnose: perfect predictions and pooled files") {
  TempDir dir;
  const auto a = dir.file("a.csv", "y,y_hat\n1,1\n2,2\n3,3\n4,4\n");
  auto out = run("diagnose", {{"pred-file", a}, {"scatter", dir.file("s.csv")}});
  CHECK(out.report["results"][0]["eta_hat"].get<double>() == doctest::Approx(1.0));
  CHECK(slurp(dir.file("s.csv")).rfind("y,y_hat,fitted\n", 0) == 0);

  const auto b = dir.file("b.csv", "y,y_hat\n0,1\n5,3\n7,4\n");
  const auto c = dir.file("c.csv", "y,y_hat\n1,0.5\n9,6\n2,2.5\n");
  const auto both = dir.file("bc.csv", "y,y_hat\n0,1\n5,3\n7,4\n1,0.5\n9,6\n2,2.5\n");
  const auto split = run("diagnose", {{"pred-file", b + "," + c}});
  const auto pooled = run("diagnose", {{"pred-file", both}});
  CHECK(split.report["results"].dump() == pooled.report["results"].dump());
  CHECK(split.report["diagnostics"]["files"].size() == 2);
}

TEST_CASE("exit codes and error documents") {
  CHECK(exit_code_for(ErrorCode::kConfig) == kExitUsage);
  CHECK(exit_code_for(ErrorCode::kParse) == kExitInput);
  CHECK(exit_code_for(ErrorCode::kSingularSystem) == kExitNumerical);
  CHECK(exit_code_for(ErrorCode::kIo) == kExitOutput);
  const auto j = error_json(ErrorCode::kParse, "boom");
  CHECK(j["schema"] == "umlr-error/v1");
  CHECK(j["error"]["message"] == "boom");
  CHECK(j["exit_code"] == kExitInput);

  TempDir dir;
  const auto p = dir.file("y.csv", "y,t,x1\n1,0,1\n2,1,2\n");
  std::string a0 = "umlr", a1 = "estimate", a2 = "--data", a3 = p, a4 = "--lambda", a5 = "oops";
  char* argv[] = {a0.data(), a1.data(), a2.data(), a3.data(), a4.data(), a5.data()};
  CHECK(main_entry(6, argv) == kExitUsage);
  std::string b1 = "simulate", b2 = "--unknown-flag";
  char* argv2[] = {a0.data(), b1.data(), b2.data()};
  CHECK(main_entry(3, argv2) == kExitUsage);
}

TEST_CASE("write_file_atomic replaces content and leaves no temporary") {
  TempDir dir;
  const auto p = dir.file("o.txt");
  write_file_atomic(p, "one");
  write_file_atomic(p, "two");
  CHECK(slurp(p) == "two");
  int entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir.path)) ++entries;
  CHECK(entries == 1);
  CHECK(code_of([&] { write_file_atomic((dir.path / "missing" / "x").string(), "z"); }) == ErrorCode::kIo);
}

TEST_CASE("format_double round-trips") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 12345678.9}) {
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(std::nan("")) == "nan");
}
