#include "auxdesign/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "auxdesign/format.hpp"

namespace auxdesign {

namespace {

void check_keys(const toml::table& t, const std::string& where, const std::set<std::string>& allowed) {
  for (const auto& [k, v] : t) {
    if (!allowed.count(std::string(k.str())))
      throw ConfigError("config: unknown key '" + std::string(k.str()) + "' in " + where);
  }
}

const toml::table* sub(const toml::table& root, const char* name) {
  const toml::node* n = root.get(name);
  if (!n) return nullptr;
  if (!n->is_table()) throw ConfigError(std::string("config: '") + name + "' must be a table");
  return n->as_table();
}

std::size_t count(const toml::table& t, const char* key, std::size_t fallback, std::size_t min = 1) {
  const toml::node* n = t.get(key);
  if (!n) return fallback;
  const auto v = n->value<std::int64_t>();
  if (!v || !n->is_integer()) throw ConfigError(std::string("config: '") + key + "' must be an integer");
  if (*v < static_cast<std::int64_t>(min))
    throw ConfigError(std::string("config: '") + key + "' must be at least " + std::to_string(min));
  return static_cast<std::size_t>(*v);
}

double real(const toml::table& t, const char* key, double fallback) {
  const toml::node* n = t.get(key);
  if (!n) return fallback;
  const auto v = n->value<double>();
  if (!v) throw ConfigError(std::string("config: '") + key + "' must be a number");
  return *v;
}

std::string text(const toml::table& t, const char* key, const std::string& fallback) {
  const toml::node* n = t.get(key);
  if (!n) return fallback;
  const auto v = n->value<std::string>();
  if (!v) throw ConfigError(std::string("config: '") + key + "' must be a string");
  return *v;
}

bool flag(const toml::table& t, const char* key, bool fallback) {
  const toml::node* n = t.get(key);
  if (!n) return fallback;
  const auto v = n->value<bool>();
  if (!v) throw ConfigError(std::string("config: '") + key + "' must be a boolean");
  return *v;
}

const toml::array& list(const toml::node& n, const char* key) {
  if (!n.is_array()) throw ConfigError(std::string("config: '") + key + "' must be an array");
  return *n.as_array();
}

}  // namespace

Evaluator evaluator_from_name(std::string_view name) {
  if (name == "aux") return Evaluator::Aux;
  if (name == "nested-aux") return Evaluator::NestedAux;
  if (name == "nested-exact") return Evaluator::NestedExact;
  throw ConfigError("unknown evaluator '" + std::string(name) + "' (aux | nested-aux | nested-exact)");
}

std::string evaluator_name(Evaluator e) {
  switch (e) {
    case Evaluator::Aux: return "aux";
    case Evaluator::NestedAux: return "nested-aux";
    case Evaluator::NestedExact: return "nested-exact";
  }
  return "";
}

void ExperimentConfig::validate() const {
  if (schema != kSchemaVersion) throw ConfigError("config: unsupported schema version " + std::to_string(schema));
  if (models.empty()) throw ConfigError("config: no model given");
  const auto& keys = model_keys();
  for (const auto& k : models)
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) throw ConfigError("config: unknown model '" + k + "'");
  (void)AuxiliaryFamily::from_name(family);
  if (comparison()) {
    if (!model_probs.empty() && model_probs.size() != models.size())
      throw ConfigError("config: one prior probability per model is required");
  } else if (models.size() != 1) {
    throw ConfigError("config: " + utility_name(utility) + " needs exactly one model");
  }
  ace.validate();
  if (n.empty()) throw ConfigError("config: n must list at least one run count");
  for (std::size_t k : n)
    if (k == 0) throw ConfigError("config: run counts must be positive");
  if (M < 3 || N < 2 || L < 2 || M0 == 0 || N0 == 0) throw ConfigError("config: training sizes are too small");
  if (!(max_failure_rate >= 0.0 && max_failure_rate <= 1.0))
    throw ConfigError("config: max_failure_rate must lie in [0, 1]");
  if (mgp_multistarts < 1) throw ConfigError("config: multistarts must be positive");
  if (replicates == 0 || eval_B == 0 || eval_C == 0) throw ConfigError("config: evaluation sizes must be positive");
  const ModelSpec spec = make_model(models.front());
  if (!bounds.empty()) {
    if (bounds.size() != spec.space.w()) throw ConfigError("config: bounds do not match the design dimension");
    for (const auto& b : bounds)
      if (!(b.hi > b.lo)) throw ConfigError("config: every bound needs lo < hi");
  }
  if (min_spacing && *min_spacing < 0.0) throw ConfigError("config: min_spacing must be non-negative");
  for (Evaluator e : evaluators) {
    if (comparison() && e != Evaluator::Aux)
      throw ConfigError("config: model utilities support the aux evaluator only");
    if (e == Evaluator::NestedExact && !spec.model->has_log_density())
      throw ConfigError("config: nested-exact needs a tractable likelihood; '" + models.front() + "' has none");
  }
}

std::string ExperimentConfig::canonical() const {
  std::ostringstream s;
  s << "schema=" << schema << ";seed=" << seed << ";models=";
  for (const auto& m : models) s << m << ',';
  s << ";probs=";
  for (double p : model_probs) s << fmt17(p) << ',';
  s << ";bounds=";
  for (const auto& b : bounds) s << fmt17(b.lo) << ':' << fmt17(b.hi) << ',';
  s << ";spacing=" << (min_spacing ? fmt17(*min_spacing) : "-") << ";family=" << family << ";M=" << M << ";N=" << N
    << ";L=" << L << ";starts=" << mgp_multistarts << ";fail=" << fmt17(max_failure_rate)
    << ";density=" << (copula_density == CopulaDensity::Paper ? "paper" : "standard")
    << ";diag=" << diagnostics << ";M0=" << M0 << ";N0=" << N0 << ";coupled=" << coupled_check
    << ";utility=" << utility_name(utility) << ";n=";
  for (std::size_t k : n) s << k << ',';
  s << ";Q=" << ace.Q << ";Bfit=" << ace.B_fit << ";Btest=" << ace.B_test << ";it=" << ace.iterations
    << ";restarts=" << ace.restarts << ";Bfinal=" << ace.B_final << ";acc=" << acceptance_name(ace.acceptance)
    << ";eval=";
  for (Evaluator e : evaluators) s << evaluator_name(e) << ',';
  s << ";B=" << eval_B << ";C=" << eval_C << ";reps=" << replicates;
  return s.str();
}

ExperimentConfig parse_config(const std::string& toml_text) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& err) {
    std::ostringstream msg;
    msg << "config: " << err.description() << " at line " << err.source().begin.line;
    throw ConfigError(msg.str());
  }
  check_keys(root, "the top level",
             {"schema", "seed", "output", "model", "auxiliary", "diagnostics", "utility", "ace", "evaluation"});
  ExperimentConfig c;
  c.schema = static_cast<int>(count(root, "schema", kSchemaVersion));
  c.seed = count(root, "seed", 0, 0);
  c.output_dir = text(root, "output", c.output_dir);

  const toml::table* model = sub(root, "model");
  if (!model) throw ConfigError("config: missing [model] table");
  check_keys(*model, "[model]", {"key", "keys", "probs", "bounds", "min_spacing"});
  if (model->get("key") && model->get("keys")) throw ConfigError("config: give either model.key or model.keys");
  if (model->get("key")) c.models = {text(*model, "key", "")};
  if (const toml::node* ks = model->get("keys"))
    for (const auto& k : list(*ks, "keys")) {
      const auto v = k.value<std::string>();
      if (!v) throw ConfigError("config: model.keys must hold strings");
      c.models.push_back(*v);
    }
  if (const toml::node* ps = model->get("probs"))
    for (const auto& p : list(*ps, "probs")) {
      const auto v = p.value<double>();
      if (!v) throw ConfigError("config: model.probs must hold numbers");
      c.model_probs.push_back(*v);
    }
  if (const toml::node* bs = model->get("bounds"))
    for (const auto& b : list(*bs, "bounds")) {
      const toml::array* pair = b.as_array();
      if (!pair || pair->size() != 2 || !pair->get(0)->value<double>() || !pair->get(1)->value<double>())
        throw ConfigError("config: model.bounds must hold [lo, hi] pairs");
      c.bounds.push_back({*pair->get(0)->value<double>(), *pair->get(1)->value<double>()});
    }
  if (model->get("min_spacing")) c.min_spacing = real(*model, "min_spacing", 0.0);

  if (const toml::table* aux = sub(root, "auxiliary")) {
    check_keys(*aux, "[auxiliary]", {"family", "M", "N", "L", "multistarts", "max_failure_rate", "copula_density"});
    c.family = text(*aux, "family", c.family);
    c.M = count(*aux, "M", c.M);
    c.N = count(*aux, "N", c.N);
    c.L = count(*aux, "L", c.L);
    c.mgp_multistarts = static_cast<int>(count(*aux, "multistarts", static_cast<std::size_t>(c.mgp_multistarts)));
    c.max_failure_rate = real(*aux, "max_failure_rate", c.max_failure_rate);
    const std::string density = text(*aux, "copula_density", "standard");
    if (density == "paper") c.copula_density = CopulaDensity::Paper;
    else if (density != "standard") throw ConfigError("config: copula_density must be 'standard' or 'paper'");
  }
  if (const toml::table* d = sub(root, "diagnostics")) {
    check_keys(*d, "[diagnostics]", {"enabled", "M0", "N0", "coupled"});
    c.diagnostics = flag(*d, "enabled", c.diagnostics);
    c.M0 = count(*d, "M0", c.M0);
    c.N0 = count(*d, "N0", c.N0);
    c.coupled_check = flag(*d, "coupled", c.coupled_check);
  }
  if (const toml::table* u = sub(root, "utility")) {
    check_keys(*u, "[utility]", {"kind", "n"});
    c.utility = utility_from_name(text(*u, "kind", "SIG"));
    if (const toml::node* ns = u->get("n")) {
      c.n.clear();
      if (ns->is_integer()) {
        c.n.push_back(count(*u, "n", 1));
      } else {
        for (const auto& k : list(*ns, "n")) {
          const auto v = k.value<std::int64_t>();
          if (!v || *v < 1) throw ConfigError("config: utility.n must hold positive integers");
          c.n.push_back(static_cast<std::size_t>(*v));
        }
      }
    }
  }
  if (const toml::table* a = sub(root, "ace")) {
    check_keys(*a, "[ace]", {"Q", "B_fit", "B_test", "iterations", "restarts", "B_final", "acceptance"});
    c.ace.Q = count(*a, "Q", c.ace.Q);
    c.ace.B_fit = count(*a, "B_fit", c.ace.B_fit);
    c.ace.B_test = count(*a, "B_test", c.ace.B_test);
    c.ace.iterations = count(*a, "iterations", c.ace.iterations);
    c.ace.restarts = count(*a, "restarts", c.ace.restarts);
    c.ace.B_final = count(*a, "B_final", c.ace.B_final);
    c.ace.acceptance = acceptance_from_name(text(*a, "acceptance", "normal"));
  }
  if (const toml::table* e = sub(root, "evaluation")) {
    check_keys(*e, "[evaluation]", {"evaluators", "B", "C", "replicates"});
    if (const toml::node* es = e->get("evaluators")) {
      c.evaluators.clear();
      for (const auto& v : list(*es, "evaluators")) {
        const auto s = v.value<std::string>();
        if (!s) throw ConfigError("config: evaluation.evaluators must hold strings");
        c.evaluators.push_back(evaluator_from_name(*s));
      }
    }
    c.eval_B = count(*e, "B", c.eval_B);
    c.eval_C = count(*e, "C", c.eval_C);
    c.replicates = count(*e, "replicates", c.replicates);
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace auxdesign
