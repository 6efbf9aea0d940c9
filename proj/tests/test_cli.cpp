#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "lrq/cli.hpp"
#include "lrq/spec_io.hpp"

namespace fs = std::filesystem;
using lrq::io::Json;

namespace {

const fs::path kConfigs = fs::path(LRQ_SOURCE_DIR) / "configs";

struct Run {
  int code = -1;
  std::string csv;
  std::string err;
};

Run run(const std::string& command, const fs::path& config, std::optional<int> workers = {},
        std::optional<fs::path> output = {}) {
  lrq::cli::Invocation inv;
  inv.command = command;
  inv.config = config;
  inv.workers = workers;
  inv.output = output;
  std::ostringstream out, err;
  Run r;
  r.code = lrq::cli::execute(inv, out, err);
  r.csv = out.str();
  r.err = err.str();
  return r;
}

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("lrq_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                         "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path write(const std::string& name, const Json& j) const {
    const auto p = path_ / name;
    std::ofstream(p) << j.dump(2);
    return p;
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

Json error_record(const std::string& err) { return Json::parse(err.substr(0, err.find('\n'))); }

Json u3_model() {
  const double third = 1.0 / 3.0;
  return Json{{"schema", "lrq-model/1"},
              {"family", "markov"},
              {"order", 1},
              {"vocab", 3},
              {"table", std::vector<double>(9, third)}};
}

}  // namespace

TEST(Report, NumberFormatting) {
  EXPECT_EQ(lrq::format_number(0.1), "0.1");
  EXPECT_EQ(lrq::format_number(-0.0), "0");
  EXPECT_EQ(lrq::format_number(lrq::kInf), "inf");
  EXPECT_EQ(lrq::format_number(-lrq::kInf), "-inf");
  EXPECT_EQ(lrq::format_number(lrq::kNa), "na");
  EXPECT_EQ(std::stod(lrq::format_number(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Cli, QueryDiscreteU3HitAtThree) {
  TempDir dir;
  dir.write("u3.json", u3_model());
  const auto cfg = dir.write("cfg.json", Json{{"schema", "lrq-experiment/1"},
                                              {"id", "u3"},
                                              {"model", "u3.json"},
                                              {"query", {{"kind", "hit_at"}, {"a", {0}}, {"k", 3}}}});
  const auto r = run("query-discrete", cfg);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = parse_csv(r.csv);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"experiment", "t_or_K", "method", "mean", "var", "se", "n", "wall_ms"}));
  EXPECT_EQ(rows[1][0], "u3");
  EXPECT_EQ(rows[1][1], "3");
  EXPECT_EQ(rows[1][2], "exact");
  EXPECT_NEAR(std::stod(rows[1][3]), 4.0 / 27.0, 1e-15);
  EXPECT_EQ(rows[1][7], "na");
  EXPECT_NE(r.err.find("\"status\":\"ok\""), std::string::npos);
}

TEST(Cli, PoissonAllMarksHasZeroVariance) {
  const auto r = run("hit-cdf", kConfigs / "poisson_hit_cdf.json");
  ASSERT_EQ(r.code, 0) << r.err;
  int is_rows = 0;
  for (const auto& row : parse_csv(r.csv))
    if (row[2] == "IS") {
      ++is_rows;
      EXPECT_EQ(row[4], "0");
      EXPECT_NEAR(std::stod(row[3]), -std::expm1(-2.0 * std::stod(row[1])), 1e-9);
    }
  EXPECT_EQ(is_rows, 6);
}

TEST(Cli, EfficiencyOfZeroVarianceIsInfinite) {
  const auto r = run("hit-eff", kConfigs / "poisson_hit_eff.json");
  ASSERT_EQ(r.code, 0) << r.err;
  int seen = 0;
  for (const auto& row : parse_csv(r.csv))
    if (row[2] == "eff:IS/NE") {
      ++seen;
      EXPECT_EQ(row[3], "inf");
    }
  EXPECT_EQ(seen, 5);
}

TEST(Cli, MertonSweepShape) {
  const auto r = run("hit-est", kConfigs / "merton_sweep.json");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = parse_csv(r.csv);
  std::set<std::string> curves;
  for (std::size_t i = 1; i < rows.size(); ++i) curves.insert(rows[i][0] + "|" + rows[i][2]);
  EXPECT_EQ(curves.size(), 7u * 4u);
  EXPECT_EQ(rows.size(), 1u + 7u * 4u * 10u);
}

TEST(Cli, RerunsAndWorkerCountsAreByteIdentical) {
  const std::vector<std::pair<std::string, std::string>> cases{
      {"query-discrete", "u3_hit3.json"}, {"hit-cdf", "poisson_hit_cdf.json"}, {"a-before-b", "poisson_before.json"},
      {"nth-mark", "poisson_nth.json"},   {"hit-est", "poisson_hit_est.json"}, {"joint", "poisson_joint.json"},
      {"beam", "u3_beam.json"},
  };
  for (const auto& [cmd, file] : cases) {
    const auto a = run(cmd, kConfigs / file, 1);
    const auto b = run(cmd, kConfigs / file, 1);
    const auto c = run(cmd, kConfigs / file, 8);
    ASSERT_EQ(a.code, 0) << cmd << ": " << a.err;
    EXPECT_EQ(a.csv, b.csv) << cmd;
    EXPECT_EQ(a.csv, c.csv) << cmd;
  }
}

TEST(Cli, ConfigForAnotherCommandIsRejected) {
  const auto r = run("hit-eff", kConfigs / "poisson_hit_est.json");
  EXPECT_EQ(r.code, lrq::cli::kExitConfig);
  EXPECT_EQ(error_record(r.err)["field"], "command");
}

TEST(Cli, UnknownFieldIsAConfigError) {
  TempDir dir;
  dir.write("u3.json", u3_model());
  const auto cfg = dir.write("cfg.json", Json{{"schema", "lrq-experiment/1"},
                                              {"model", "u3.json"},
                                              {"query", {{"kind", "hit_at"}, {"a", {0}}, {"k", 3}}},
                                              {"n_samples", 10}});
  const auto r = run("query-discrete", cfg);
  EXPECT_EQ(r.code, lrq::cli::kExitConfig);
  const auto rec = error_record(r.err);
  EXPECT_EQ(rec["status"], "error");
  EXPECT_EQ(rec["kind"], "config");
  EXPECT_EQ(rec["field"], "n_samples");
  EXPECT_EQ(rec["file"], cfg.string());
  EXPECT_TRUE(r.csv.empty());
}

TEST(Cli, NestedFieldErrorsNameTheModelFile) {
  TempDir dir;
  auto model = u3_model();
  model["table"][0] = 0.9;
  const auto model_path = dir.write("u3.json", model);
  const auto cfg = dir.write("cfg.json", Json{{"schema", "lrq-experiment/1"},
                                              {"model", "u3.json"},
                                              {"query", {{"kind", "hit_at"}, {"a", {0}}, {"k", 3}}}});
  const auto r = run("query-discrete", cfg);
  EXPECT_EQ(r.code, lrq::cli::kExitConfig);
  const auto rec = error_record(r.err);
  EXPECT_EQ(rec["file"], model_path.string());
  EXPECT_EQ(rec["field"], "table");
}

TEST(Cli, MissingSchemaAndMissingFiles) {
  TempDir dir;
  const auto no_schema = dir.write("a.json", Json{{"model", "u3.json"}});
  EXPECT_EQ(run("beam", no_schema).code, lrq::cli::kExitConfig);
  EXPECT_EQ(run("beam", dir.path() / "absent.json").code, lrq::cli::kExitConfig);
  const auto missing_model =
      dir.write("b.json", Json{{"schema", "lrq-experiment/1"}, {"model", "nowhere.json"}, {"query", Json::object()}});
  const auto r = run("beam", missing_model);
  EXPECT_EQ(r.code, lrq::cli::kExitConfig);
  EXPECT_EQ(error_record(r.err)["field"], "model");
}

TEST(Cli, NumericFailureExitCode) {
  TempDir dir;
  const auto cfg =
      dir.write("cfg.json", Json{{"schema", "lrq-experiment/1"},
                                 {"process", {{"family", "process"}, {"name", "merton"}, {"params", {{"lambda", 500}}}}},
                                 {"ght", {{"passage", 2}}},
                                 {"grid", {1.0}},
                                 {"n", 4}});
  const auto r = run("hit-est", cfg);
  EXPECT_EQ(r.code, lrq::cli::kExitNumeric);
  EXPECT_EQ(error_record(r.err)["kind"], "numeric");
}

TEST(Cli, CommandLineUsageErrors) {
  std::ostringstream out, err;
  std::vector<std::string> args{"lrq", "hit-est"};
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  EXPECT_EQ(lrq::cli::main(static_cast<int>(argv.size()), argv.data(), out, err), lrq::cli::kExitConfig);
  EXPECT_EQ(error_record(err.str())["kind"], "usage");
}

TEST(Cli, AllSubcommandsRegistered) {
  const std::vector<std::string> expected{"a-before-b", "beam",      "censor-ll", "cover",   "gen-model",
                                          "ground-truth", "hit-cdf", "hit-eff",   "hit-est", "hybrid",
                                          "joint",        "nth-mark", "query-discrete"};
  EXPECT_EQ(lrq::cli::commands(), expected);
}

TEST(Cli, GeneratedModelsRoundTrip) {
  TempDir dir;
  const std::vector<Json> gens{
      {{"family", "markov"}, {"order", 2}, {"vocab", 3}},
      {{"family", "hawkes"}, {"marks", 4}, {"law", "block"}, {"block", 2}},
      {{"family", "self_correcting"}, {"marks", 3}},
      {{"family", "ctmc"}, {"vertices", 5}, {"temperature", 0.5}},
  };
  for (std::size_t i = 0; i < gens.size(); ++i) {
    Json cfg = gens[i];
    cfg["schema"] = "lrq-experiment/1";
    cfg["seed"] = 100 + i;
    const auto model_path = dir.path() / ("model" + std::to_string(i) + ".json");
    cfg["output"] = model_path.string();
    const auto r = run("gen-model", dir.write("gen" + std::to_string(i) + ".json", cfg));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto doc = lrq::io::load_doc(model_path);
    auto f = lrq::io::root(doc);
    const std::string family = gens[i]["family"];
    Json again;
    if (family == "markov") {
      again = lrq::io::to_json(lrq::io::markov_from_json(f));
    } else if (family == "ctmc") {
      auto p = lrq::io::process_from_json(f);
      again = lrq::io::to_json(dynamic_cast<const lrq::CtmcProcess&>(*p));
    } else {
      auto m = lrq::io::mtpp_from_json(f);
      if (auto* h = dynamic_cast<const lrq::HawkesExp*>(m.get())) again = lrq::io::to_json(*h);
      if (auto* s = dynamic_cast<const lrq::SelfCorrecting*>(m.get())) again = lrq::io::to_json(*s);
    }
    EXPECT_EQ(again, doc.json) << family;
    // Same seed, same file.
    const auto first = doc.json;
    ASSERT_EQ(run("gen-model", dir.path() / ("gen" + std::to_string(i) + ".json")).code, 0);
    EXPECT_EQ(lrq::io::load_doc(model_path).json, first);
  }
}

TEST(SpecIo, GhtDescriptors) {
  const lrq::PoissonJumpProcess p({1.0, 2.0});
  const Json spec = Json::parse(R"({
    "max": [
      {"hit": {"at_least": 1, "axis": 0}},
      {"first_if_before": {"box": [{"lo": 0, "hi": "inf"}, {"lo": 1}]},
       "other": {"hit": {"at_least": 3, "axis": 1}}}
    ]})");
  lrq::io::Fields f(spec, "inline", "");
  const auto g = lrq::io::ght_from_json(f, p);
  EXPECT_EQ(g.kind, lrq::Ght::Kind::max);
  ASSERT_EQ(g.children.size(), 2u);
  EXPECT_EQ(g.children[1].kind, lrq::Ght::Kind::first_if_before);
  const std::vector<double> x{0.0, 1.0};
  EXPECT_TRUE(g.children[1].region.contains(x));

  const Json bad = {{"hit", {{"at_least", 1}, {"axis", 2}}}};
  lrq::io::Fields fb(bad, "inline", "");
  EXPECT_THROW(lrq::io::ght_from_json(fb, p), lrq::io::SpecError);
}

TEST(SpecIo, MarkSetsAndSchedules) {
  const Json spec = {{"breakpoints", {0, 1, 2}}, {"observed", {"101", {0}}}};
  lrq::io::Fields f(spec, "inline", "");
  const auto s = lrq::io::censor_schedule_from_json(f, 3);
  EXPECT_EQ(s.observed()[0], (lrq::MarkMask{1, 0, 1}));
  EXPECT_EQ(s.observed()[1], (lrq::MarkMask{1, 0, 0}));
  const Json bits = "10";
  lrq::io::Fields g(Json::object(), "inline", "");
  EXPECT_THROW(lrq::io::mark_set_from_json(bits, 3, g, "a"), lrq::io::SpecError);
}
