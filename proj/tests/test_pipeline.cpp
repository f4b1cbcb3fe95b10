#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "auxdesign/pipeline.hpp"

using namespace auxdesign;
namespace fs = std::filesystem;

namespace {

const char* kSmoke = R"(
schema = 1
seed = 7
[model]
key = "compartmental"
[auxiliary]
family = "normal"
M = 40
N = 200
L = 40
multistarts = 2
[diagnostics]
M0 = 10
N0 = 100
[utility]
kind = "SIG"
n = [3]
[ace]
Q = 5
B_fit = 10
B_test = 20
iterations = 1
restarts = 1
B_final = 20
[evaluation]
evaluators = ["aux", "nested-aux", "nested-exact"]
B = 20
C = 20
replicates = 2
)";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("auxdesign_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("config defaults and overrides") {
  const ExperimentConfig c = parse_config("[model]\nkey = \"aphid\"\n[auxiliary]\nfamily = \"negbin\"\n");
  CHECK(c.M == 500);
  CHECK(c.N == 10000);
  CHECK(c.L == 500);
  CHECK(c.M0 == 100);
  CHECK(c.ace.Q == 20);
  CHECK(c.ace.B_test == 20000);
  CHECK(c.utility == UtilityKind::SIG);
  const ExperimentConfig s = parse_config(kSmoke);
  CHECK(s.M == 40);
  CHECK(s.n == std::vector<std::size_t>{3});
  CHECK(s.evaluators.size() == 3);
  CHECK(s.canonical() != c.canonical());
}

TEST_CASE("schema errors are raised before any compute") {
  CHECK_THROWS_AS(parse_config("[model]\nkey = \"aphid\"\n[auxiliary]\nfamily = \"gauss\"\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[model]\nkey = \"mystery\"\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[model]\nkey = \"aphid\"\ncolour = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("schema = 2\n[model]\nkey = \"aphid\"\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[model]\nkey = \"aphid\"\n[auxiliary]\nM = -3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[model]\nkey = \"aphid\"\n[evaluation]\nevaluators = [\"nested-exact\"]\n"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config("[model]\nkeys = [\"epi_si\", \"epi_sei\"]\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[model]\nkeys = [\"epi_si\", \"epi_sei\"]\n[utility]\nkind = \"ZERO_ONE\"\n"
                               "[evaluation]\nevaluators = [\"nested-aux\"]\n"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config("[model\nkey = 1"), ConfigError);
  const ExperimentConfig m = parse_config("[model]\nkeys = [\"epi_si\", \"epi_sei\"]\n[utility]\nkind = \"ZERO_ONE\"\n");
  CHECK(m.comparison());
}

TEST_CASE("full run writes every artifact and is reproducible") {
  const ExperimentConfig cfg = parse_config(kSmoke);
  const fs::path a = scratch("run_a"), b = scratch("run_b");
  set_thread_count(1);
  {
    Experiment ex(cfg, a.string());
    CHECK(ex.run(false) == 0);
  }
  for (const char* f : {"summary.json", "timings.json", "designs/ace_n3.csv", "designs/equal_n3.csv",
                        "traces/ace_n3.csv", "traces/eval_ace_n3_aux.csv", "traces/draws_equal_n3_nested-exact.csv",
                        "diagnostics/conditional.csv", "diagnostics/marginal.json", "diagnostics/coupled_n3.json"})
    CHECK_MESSAGE(fs::exists(a / f), f);
  CHECK(load_design((a / "designs/ace_n3.csv").string()).n() == 3);
  const std::string first = slurp(a / "summary.json");

  // Second run reuses the cached emulators.
  {
    Experiment ex(cfg, a.string());
    CHECK(ex.build_aux());
    CHECK(ex.run(false) == 0);
  }
  CHECK(slurp(a / "summary.json") == first);

  set_thread_count(3);
  {
    Experiment ex(cfg, b.string());
    CHECK_FALSE(ex.build_aux());
    CHECK(ex.run(false) == 0);
  }
  set_thread_count(1);
  CHECK(slurp(b / "summary.json") == first);
  CHECK(slurp(b / "traces/ace_n3.csv") == slurp(a / "traces/ace_n3.csv"));

  const auto j = nlohmann::json::parse(first);
  CHECK(j["gate_passed"].get<bool>());
  CHECK(j["designs"][0]["ace"]["evaluations"]["nested-exact"]["replicates"].size() == 2);
  CHECK(j["designs"][0]["equal"]["design"].size() == 3);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("evaluation tables") {
  const ExperimentConfig cfg = parse_config(kSmoke);
  const fs::path a = scratch("eval");
  Experiment ex(cfg, a.string());
  const Design D = ex.baseline_design(3);
  const EvaluationTable one = ex.evaluate(D, Evaluator::NestedExact, 1);
  CHECK_FALSE(one.se.has_value());
  CHECK(nlohmann::json::parse(evaluation_table_json(one))["se"].is_null());
  const EvaluationTable two = ex.evaluate(D, Evaluator::Aux, 2);
  REQUIRE(two.se.has_value());
  CHECK(std::isfinite(*two.se));
  CHECK(std::isfinite(two.mean));
  std::ostringstream csv;
  write_evaluation_table_csv(csv, two);
  CHECK(csv.str().rfind("replicate,estimate,se\n", 0) == 0);
  fs::remove_all(a);
}

TEST_CASE("nested-exact is refused for an intractable model") {
  ExperimentConfig cfg = parse_config("[model]\nkey = \"aphid\"\n[auxiliary]\nfamily = \"negbin\"\n");
  Experiment ex(cfg, scratch("refuse").string());
  CHECK_THROWS_AS(ex.evaluate(ex.baseline_design(3), Evaluator::NestedExact, 1), ConfigError);
}

TEST_CASE("a failed adequacy gate stops the run unless forced") {
  // Aphid counts are far more dispersed than a Poisson marginal allows.
  const ExperimentConfig cfg = parse_config(R"(
seed = 3
[model]
key = "aphid"
[auxiliary]
family = "poisson"
M = 30
N = 200
L = 30
multistarts = 2
[diagnostics]
M0 = 20
N0 = 200
coupled = false
[utility]
n = [2]
[ace]
Q = 4
B_fit = 5
B_test = 5
iterations = 1
restarts = 1
B_final = 5
[evaluation]
B = 5
C = 5
replicates = 1
)");
  const fs::path a = scratch("gate");
  Experiment ex(cfg, a.string());
  CHECK(ex.run(false) == 2);
  CHECK_FALSE(fs::exists(a / "designs"));
  const auto j = nlohmann::json::parse(slurp(a / "summary.json"));
  CHECK_FALSE(j["gate_passed"].get<bool>());
  Experiment forced(cfg, a.string());
  CHECK(forced.run(true) == 0);
  CHECK(fs::exists(a / "designs/ace_n2.csv"));
  fs::remove_all(a);
}

TEST_CASE("benchmark table") {
  std::ostringstream csv;
  write_benchmark_csv(csv, {{10, 20, 0.5, 2.0}});
  CHECK(csv.str() == "B,C,aux_seconds,nested_seconds,ratio\n10,20,0.5,2,4\n");
}
