#include "auxdesign/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "auxdesign/format.hpp"

namespace auxdesign {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::string prior_text(const Prior& prior) {
  std::ostringstream s;
  for (const PriorBlock& b : prior.blocks()) {
    s << static_cast<int>(b.kind) << '[';
    for (std::size_t i : b.indices) s << i << ',';
    s << "]a";
    for (double v : b.a) s << fmt17(v) << ',';
    s << 'b';
    for (double v : b.b) s << fmt17(v) << ',';
    s << 'c';
    for (Eigen::Index i = 0; i < b.cov.size(); ++i) s << fmt17(b.cov.data()[i]) << ',';
    s << (b.nonnegative ? "+" : "") << ';';
  }
  return s.str();
}

std::string hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

ojson design_json(const Design& D) {
  ojson rows = ojson::array();
  for (std::size_t k = 0; k < D.n(); ++k) {
    ojson row = ojson::array();
    for (std::size_t c = 0; c < D.w(); ++c) row.push_back(D(k, c));
    rows.push_back(D.w() == 1 ? row[0] : row);
  }
  return rows;
}

ojson table_json(const EvaluationTable& t) {
  ojson j;
  j["evaluator"] = evaluator_name(t.evaluator);
  j["replicates"] = t.estimates;
  j["mean"] = t.mean;
  j["se"] = t.se ? ojson(*t.se) : ojson(nullptr);
  return j;
}

ojson report_json(const AdequacyReport& r) {
  return ojson::parse(adequacy_summary_json(r));
}

}  // namespace

Experiment::Experiment(ExperimentConfig config, std::string out_dir)
    : config_(std::move(config)), out_(std::move(out_dir)) {
  config_.validate();
  if (config_.comparison()) {
    comparison_.set = make_model_set(config_.models, config_.model_probs);
    space_ = comparison_.set.space;
    comparison_.density = config_.copula_density;
  } else {
    const ModelSpec spec = make_model(config_.models.front());
    estimation_.model = spec.model;
    estimation_.prior = spec.prior;
    space_ = spec.space;
    estimation_.density = config_.copula_density;
  }
  if (!config_.bounds.empty() || config_.min_spacing) {
    std::vector<Interval> bounds = config_.bounds.empty() ? space_.bounds() : config_.bounds;
    std::vector<MinSpacing> cons = space_.constraints();
    if (config_.min_spacing) {
      cons.erase(std::remove_if(cons.begin(), cons.end(), [](const MinSpacing& m) { return m.coordinate == 0; }),
                 cons.end());
      if (*config_.min_spacing > 0.0) cons.push_back({0, *config_.min_spacing});
    }
    space_ = DesignSpace(bounds, cons);
  }
  estimation_.space = space_;
  comparison_.set.space = space_;
}

std::string Experiment::baseline_label() const { return space_.w() == 1 ? "equal" : "lhd"; }

Design Experiment::baseline_design(std::size_t n) const {
  if (space_.w() == 1) return equally_spaced(space_, n);
  return maximin_lhd(space_, n, 100, derive_seed(config_.seed, "lhd", n));
}

std::string Experiment::path(const std::string& rel) const { return (fs::path(out_) / rel).string(); }

std::string Experiment::emulator_hash(const std::string& role) const {
  std::ostringstream s;
  s << role << ";models=";
  for (const auto& m : config_.models) s << m << ',';
  s << ";probs=";
  for (double p : config_.model_probs) s << fmt17(p) << ',';
  s << ";priors=";
  if (config_.comparison()) {
    for (const Prior& p : comparison_.set.priors) s << prior_text(p) << '|';
  } else {
    s << prior_text(estimation_.prior);
  }
  s << ";bounds=";
  for (const Interval& b : space_.bounds()) s << fmt17(b.lo) << ':' << fmt17(b.hi) << ',';
  s << ";family=" << config_.family << ";M=" << config_.M << ";N=" << config_.N << ";seed=" << config_.seed
    << ";starts=" << config_.mgp_multistarts << ";fail=" << fmt17(config_.max_failure_rate);
  return hex(derive_seed(0, s.str()));
}

bool Experiment::build_aux() {
  Stopwatch clock;
  fs::create_directories(path("emulators"));
  const AuxiliaryFamily family = AuxiliaryFamily::from_name(config_.family);
  AuxBuildOptions o;
  o.M = config_.M;
  o.N = config_.N;
  o.seed = derive_seed(config_.seed, "build");
  o.mgp_multistarts = config_.mgp_multistarts;
  o.max_failure_rate = config_.max_failure_rate;

  // Freshly built emulators are reloaded from disk so cold and warm runs share one code path.
  bool all_cached = true;
  const std::string marg_file = path("emulators/marginal-" + emulator_hash("marginal") + ".csv");
  const ModelPtr trials_model = config_.comparison() ? comparison_.set.models.front() : estimation_.model;
  if (!fs::exists(marg_file)) {
    all_cached = false;
    const MarginalAux built = config_.comparison()
                                  ? build_marginal(comparison_.set, family, o)
                                  : build_marginal(estimation_.model, estimation_.prior, space_, family, o);
    built.save(marg_file);
  }
  auto marg = std::make_shared<const MarginalAux>(MarginalAux::load(marg_file, trials_model));
  if (config_.comparison()) {
    comparison_.marg = marg;
  } else {
    estimation_.marg = marg;
    const std::string cond_file = path("emulators/conditional-" + emulator_hash("conditional") + ".csv");
    if (!fs::exists(cond_file)) {
      all_cached = false;
      build_conditional(estimation_.model, estimation_.prior, space_, family, o).save(cond_file);
    }
    estimation_.cond = std::make_shared<const ConditionalAux>(ConditionalAux::load(cond_file, estimation_.model));
  }
  built_ = true;
  timings_["build_aux"] = clock.seconds();
  return all_cached;
}

DiagnosticsOutcome Experiment::diagnose() {
  if (!built_) build_aux();
  Stopwatch clock;
  fs::create_directories(path("diagnostics"));
  DiagnosticsOutcome out;
  const std::uint64_t s = derive_seed(config_.seed, "diagnostics");
  const auto emit = [&](AdequacyReport r, const std::string& name) {
    std::ofstream csv(path("diagnostics/" + name + ".csv"));
    write_adequacy_csv(csv, r);
    write_file(path("diagnostics/" + name + ".json"), adequacy_summary_json(r) + "\n");
    out.passed = out.passed && r.adequate();
    out.reports.push_back(std::move(r));
  };
  if (config_.comparison()) {
    emit(assess_marginal(*comparison_.marg, comparison_.set, config_.M0, config_.N0, derive_seed(s, "marginal")),
         "marginal");
    if (config_.coupled_check)
      for (std::size_t n : config_.n)
        emit(assess_coupled(*comparison_.marg, comparison_.set, config_.M0, config_.L, n, derive_seed(s, "coupled", n)),
             "coupled_n" + std::to_string(n));
  } else {
    emit(assess_conditional(*estimation_.cond, estimation_.prior, space_, config_.M0, config_.N0,
                            derive_seed(s, "conditional")),
         "conditional");
    emit(assess_marginal(*estimation_.marg, estimation_.model, estimation_.prior, space_, config_.M0, config_.N0,
                         derive_seed(s, "marginal")),
         "marginal");
    if (config_.coupled_check)
      for (std::size_t n : config_.n)
        emit(assess_coupled(*estimation_.marg, estimation_.model, estimation_.prior, space_, config_.M0, config_.L, n,
                            derive_seed(s, "coupled", n)),
             "coupled_n" + std::to_string(n));
  }
  timings_["diagnose"] += clock.seconds();
  return out;
}

UtilitySampler Experiment::utility_sampler() const {
  const UtilityKind kind = config_.utility;
  const std::size_t L = config_.L;
  if (config_.comparison()) {
    const ComparisonProblem* p = &comparison_;
    return [kind, L, p](const Design& D, std::size_t B, std::uint64_t seed) {
      return expected_utility_models(kind, D, *p, {B, 1, L, seed}).u;
    };
  }
  const EstimationProblem* p = &estimation_;
  return [kind, L, p](const Design& D, std::size_t B, std::uint64_t seed) {
    return expected_utility_aux(kind, D, *p, {B, 1, L, seed}).u;
  };
}

AceResult Experiment::design(std::size_t n) {
  if (!built_) build_aux();
  Stopwatch clock;
  fs::create_directories(path("designs"));
  fs::create_directories(path("traces"));
  const AceResult res = ace_optimize(utility_sampler(), space_, n, config_.ace, derive_seed(config_.seed, "ace", n));
  save_design(path("designs/ace_n" + std::to_string(n) + ".csv"), res.best);
  std::ofstream trace(path("traces/ace_n" + std::to_string(n) + ".csv"));
  write_ace_trace_csv(trace, res.trace);
  timings_["design_n" + std::to_string(n)] = clock.seconds();
  return res;
}

EvaluationTable Experiment::evaluate(const Design& D, Evaluator evaluator, std::size_t replicates) {
  if (replicates == 0) throw ConfigError("evaluate: replicates must be positive");
  if (D.w() != space_.w()) throw ConfigError("evaluate: design has the wrong number of columns");
  if (config_.comparison() && evaluator != Evaluator::Aux)
    throw ConfigError("evaluate: model utilities support the aux evaluator only");
  if (evaluator == Evaluator::NestedExact && !estimation_.model->has_log_density())
    throw ConfigError("evaluate: nested-exact needs a tractable likelihood; '" + config_.models.front() +
                      "' has none");
  if (evaluator != Evaluator::NestedExact && !built_) build_aux();
  Stopwatch clock;
  EvaluationTable t;
  t.evaluator = evaluator;
  for (std::size_t r = 0; r < replicates; ++r) {
    const EvalBudget b{config_.eval_B, config_.eval_C, config_.L, derive_seed(config_.seed, "evaluate", r)};
    UtilityEvaluation e;
    if (config_.comparison()) {
      e = expected_utility_models(config_.utility, D, comparison_, b);
    } else if (evaluator == Evaluator::Aux) {
      e = expected_utility_aux(config_.utility, D, estimation_, b);
    } else {
      const LikelihoodSource src = evaluator == Evaluator::NestedExact ? LikelihoodSource::Exact : LikelihoodSource::Aux;
      e = expected_utility_nested(config_.utility, D, estimation_, b, {src, true});
    }
    t.estimates.push_back(e.estimate);
    t.within_se.push_back(e.se);
    if (r == 0) t.first = std::move(e);
  }
  double m = 0.0;
  for (double v : t.estimates) m += v;
  t.mean = m / static_cast<double>(replicates);
  if (replicates > 1) {
    double ss = 0.0;
    for (double v : t.estimates) ss += (v - t.mean) * (v - t.mean);
    t.se = std::sqrt(ss / static_cast<double>(replicates - 1) / static_cast<double>(replicates));
  }
  timings_["evaluate"] += clock.seconds();
  return t;
}

std::vector<CostRow> Experiment::benchmark(std::size_t n, const std::vector<std::size_t>& inner_sizes) {
  if (config_.comparison()) throw ConfigError("benchmark: needs a parameter-estimation problem");
  if (!built_) build_aux();
  Stopwatch clock;
  const Design D = baseline_design(n);
  auto rows = cost_benchmark(D, estimation_, config_.eval_B, inner_sizes, config_.L,
                             derive_seed(config_.seed, "benchmark"));
  fs::create_directories(out_);
  std::ofstream csv(path("benchmark.csv"));
  write_benchmark_csv(csv, rows);
  timings_["benchmark"] = clock.seconds();
  return rows;
}

int Experiment::run(bool force) {
  fs::create_directories(out_);
  Stopwatch clock;
  build_aux();
  DiagnosticsOutcome diag;
  if (config_.diagnostics) {
    diag = diagnose();
    if (!diag.passed && !force) {
      write_summary(&diag, {});
      timings_["total"] = clock.seconds();
      write_timings();
      return 2;
    }
  }
  std::vector<DesignOutcome> outcomes;
  for (std::size_t n : config_.n) {
    DesignOutcome o;
    o.n = n;
    const AceResult res = design(n);
    o.ace = res.best;
    o.ace_estimate = res.best_estimate;
    o.baseline = baseline_design(n);
    save_design(path("designs/" + baseline_label() + "_n" + std::to_string(n) + ".csv"), *o.baseline);
    for (Evaluator e : config_.evaluators) {
      const std::string tag = "_n" + std::to_string(n) + "_" + evaluator_name(e);
      const auto store = [&](const Design& D, const std::string& label, std::map<std::string, EvaluationTable>& into) {
        EvaluationTable t = evaluate(D, e, config_.replicates);
        std::ofstream table(path("traces/eval_" + label + tag + ".csv"));
        write_evaluation_table_csv(table, t);
        std::ofstream draws(path("traces/draws_" + label + tag + ".csv"));
        write_evaluation_csv(draws, t.first, config_.comparison());
        into[evaluator_name(e)] = std::move(t);
      };
      store(o.ace, "ace", o.ace_evals);
      if (o.baseline) store(*o.baseline, baseline_label(), o.baseline_evals);
    }
    outcomes.push_back(std::move(o));
  }
  write_summary(config_.diagnostics ? &diag : nullptr, outcomes);
  timings_["total"] = clock.seconds();
  write_timings();
  return 0;
}

void Experiment::write_summary(const DiagnosticsOutcome* diag, const std::vector<DesignOutcome>& designs) const {
  ojson j;
  j["schema"] = config_.schema;
  j["config_hash"] = hex(derive_seed(0, config_.canonical()));
  j["seed"] = config_.seed;
  j["models"] = config_.models;
  j["family"] = config_.family;
  j["utility"] = utility_name(config_.utility);
  ojson em;
  em["marginal"] = "emulators/marginal-" + emulator_hash("marginal") + ".csv";
  if (!config_.comparison()) em["conditional"] = "emulators/conditional-" + emulator_hash("conditional") + ".csv";
  j["emulators"] = em;
  if (diag) {
    ojson d = ojson::array();
    for (const auto& r : diag->reports) {
      ojson e = report_json(r);
      d.push_back(e);
    }
    j["diagnostics"] = d;
    j["gate_passed"] = diag->passed;
  }
  ojson ds = ojson::array();
  for (const DesignOutcome& o : designs) {
    ojson e;
    e["n"] = o.n;
    e["ace"]["file"] = "designs/ace_n" + std::to_string(o.n) + ".csv";
    e["ace"]["design"] = design_json(o.ace);
    e["ace"]["final_estimate"] = o.ace_estimate;
    for (const auto& [name, t] : o.ace_evals) e["ace"]["evaluations"][name] = table_json(t);
    if (o.baseline) {
      ojson& b = e[baseline_label()];
      b["file"] = "designs/" + baseline_label() + "_n" + std::to_string(o.n) + ".csv";
      b["design"] = design_json(*o.baseline);
      for (const auto& [name, t] : o.baseline_evals) b["evaluations"][name] = table_json(t);
    }
    ds.push_back(e);
  }
  j["designs"] = ds;
  write_file(path("summary.json"), j.dump(2) + "\n");
}

void Experiment::write_timings() const {
  ojson j(timings_);
  write_file(path("timings.json"), j.dump(2) + "\n");
}

std::string evaluation_table_json(const EvaluationTable& t) { return table_json(t).dump(2); }

void write_evaluation_table_csv(std::ostream& out, const EvaluationTable& t) {
  out << "replicate,estimate,se\n";
  for (std::size_t r = 0; r < t.estimates.size(); ++r)
    out << r << ',' << fmt17(t.estimates[r]) << ',' << fmt17(t.within_se[r]) << '\n';
}

void write_benchmark_csv(std::ostream& out, const std::vector<CostRow>& rows) {
  out << "B,C,aux_seconds,nested_seconds,ratio\n";
  for (const CostRow& r : rows)
    out << r.B << ',' << r.C << ',' << fmt17(r.aux_seconds) << ',' << fmt17(r.nested_seconds) << ','
        << fmt17(r.ratio()) << '\n';
}

}  // namespace auxdesign
