#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "auxdesign/pipeline.hpp"

using namespace auxdesign;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  bool force = false;
  std::string out;
  std::optional<std::size_t> iterations, restarts, q, b_fit, b_test;
  std::string acceptance, copula_density;
};

void add_common(CLI::App* app, Common& c, bool ace_flags) {
  app->add_option("config", c.config, "Experiment TOML file")->required()->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "Override the master seed");
  app->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);
  app->add_flag("--force", c.force, "Continue past a failed adequacy gate");
  app->add_option("--out", c.out, "Output directory (default: the config's output key)");
  app->add_option("--copula-density", c.copula_density, "standard | paper")->check(CLI::IsMember({"standard", "paper"}));
  if (!ace_flags) return;
  app->add_option("--iterations", c.iterations, "ACE iterations per restart");
  app->add_option("--restarts", c.restarts, "ACE restarts");
  app->add_option("--q", c.q, "ACE candidate points per coordinate");
  app->add_option("--b-fit", c.b_fit, "Monte Carlo size for emulator training");
  app->add_option("--b-test", c.b_test, "Monte Carlo size for the acceptance test");
  app->add_option("--acceptance", c.acceptance, "normal | binary")->check(CLI::IsMember({"normal", "binary"}));
}

Experiment open(const Common& c) {
  ExperimentConfig cfg = load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.iterations) cfg.ace.iterations = *c.iterations;
  if (c.restarts) cfg.ace.restarts = *c.restarts;
  if (c.q) cfg.ace.Q = *c.q;
  if (c.b_fit) cfg.ace.B_fit = *c.b_fit;
  if (c.b_test) cfg.ace.B_test = *c.b_test;
  if (!c.acceptance.empty()) cfg.ace.acceptance = acceptance_from_name(c.acceptance);
  if (!c.copula_density.empty())
    cfg.copula_density = c.copula_density == "paper" ? CopulaDensity::Paper : CopulaDensity::Standard;
  cfg.validate();
  set_thread_count(c.threads);
  return Experiment(cfg, c.out.empty() ? cfg.output_dir : c.out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian experimental design with auxiliary likelihood models"};
  app.require_subcommand(1);

  Common c;
  auto* build = app.add_subcommand("build-aux", "Build or reload the auxiliary models");
  add_common(build, c, false);

  auto* diagnose = app.add_subcommand("diagnose", "Run the adequacy checks");
  add_common(diagnose, c, false);

  std::vector<std::size_t> ns;
  auto* design = app.add_subcommand("design", "Run ACE for each n");
  add_common(design, c, true);
  design->add_option("--n", ns, "Run counts (default: the config's list)");

  std::string design_file, evaluator = "aux";
  std::size_t replicates = 0;
  auto* evaluate = app.add_subcommand("evaluate", "Estimate the expected utility of a design file");
  add_common(evaluate, c, false);
  evaluate->add_option("--design", design_file, "Design CSV")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--evaluator", evaluator, "aux | nested-aux | nested-exact")
      ->check(CLI::IsMember({"aux", "nested-aux", "nested-exact"}));
  evaluate->add_option("--replicates", replicates, "Replicates (default: the config's value)");

  std::vector<std::size_t> inner{250, 500, 1000};
  std::size_t bench_n = 0;
  auto* bench = app.add_subcommand("benchmark", "Time auxiliary MC against nested MC");
  add_common(bench, c, false);
  bench->add_option("--c", inner, "Inner sample sizes");
  bench->add_option("--n", bench_n, "Run count (default: the first configured n)");

  auto* run = app.add_subcommand("run", "All stages: build, diagnose, design, evaluate");
  add_common(run, c, true);

  CLI11_PARSE(app, argc, argv);

  try {
    Experiment ex = open(c);
    std::filesystem::create_directories(ex.out_dir());
    if (*build) {
      const bool cached = ex.build_aux();
      std::cout << (cached ? "emulators reused from cache\n" : "emulators built\n");
      ex.write_timings();
      return 0;
    }
    if (*diagnose) {
      const DiagnosticsOutcome d = ex.diagnose();
      for (const auto& r : d.reports)
        std::cout << r.kind << (r.kind == "coupled" ? " n=" + std::to_string(r.N) : std::string())
                  << " p=" << r.p_value << (r.adequate() ? " adequate" : " INADEQUATE") << '\n';
      ex.write_timings();
      if (!d.passed && !c.force) {
        std::cerr << "adequacy gate failed (use --force to continue)\n";
        return 2;
      }
      return 0;
    }
    if (*design) {
      for (std::size_t n : ns.empty() ? ex.config().n : ns) {
        const AceResult res = ex.design(n);
        std::cout << "n=" << n << " estimate=" << res.best_estimate << " -> " << ex.out_dir() << "/designs/ace_n" << n
                  << ".csv\n";
      }
      ex.write_timings();
      return 0;
    }
    if (*evaluate) {
      const Design D = load_design(design_file);
      const EvaluationTable t =
          ex.evaluate(D, evaluator_from_name(evaluator), replicates ? replicates : ex.config().replicates);
      std::filesystem::create_directories(std::filesystem::path(ex.out_dir()) / "traces");
      const std::string stem = std::filesystem::path(design_file).stem().string() + "_" + evaluator;
      std::ofstream table(std::filesystem::path(ex.out_dir()) / "traces" / ("eval_" + stem + ".csv"));
      write_evaluation_table_csv(table, t);
      std::ofstream draws(std::filesystem::path(ex.out_dir()) / "traces" / ("draws_" + stem + ".csv"));
      write_evaluation_csv(draws, t.first, ex.config().comparison());
      std::cout << evaluation_table_json(t) << '\n';
      ex.write_timings();
      return 0;
    }
    if (*bench) {
      const auto rows = ex.benchmark(bench_n ? bench_n : ex.config().n.front(), inner);
      write_benchmark_csv(std::cout, rows);
      ex.write_timings();
      return 0;
    }
    if (*run) {
      const int status = ex.run(c.force);
      if (status != 0) std::cerr << "adequacy gate failed (use --force to continue)\n";
      return status;
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 64;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
