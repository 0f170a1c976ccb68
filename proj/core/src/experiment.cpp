#include "adaptsde/experiment.hpp"

#include "adaptsde/convergence.hpp"
#include "adaptsde/csv.hpp"
#include "adaptsde/ergodicity.hpp"
#include "adaptsde/errors.hpp"
#include "adaptsde/method_pair.hpp"
#include "adaptsde/parallel.hpp"

#include <fmt/core.h>
#include <json.hpp>
#include <openssl/evp.h>

#include <array>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <memory>
#include <set>
#include <sstream>

namespace adaptsde {

using json = nlohmann::ordered_json;

namespace {

constexpr std::array<std::pair<ExperimentKind, std::string_view>, 6> kKindNames{{
    {ExperimentKind::Converge, "converge"},
    {ExperimentKind::Ergodic, "ergodic"},
    {ExperimentKind::Langevin, "langevin"},
    {ExperimentKind::Steps, "steps"},
    {ExperimentKind::Martingale, "martingale"},
    {ExperimentKind::Lyapunov, "lyapunov"},
}};

std::vector<double> dyadic(int first, int last) {
  std::vector<double> out;
  for (int i = first; i <= last; ++i) out.push_back(std::ldexp(1.0, -i));
  return out;
}

bool needs_spacing(ExperimentKind kind) {
  return kind == ExperimentKind::Ergodic || kind == ExperimentKind::Langevin ||
         kind == ExperimentKind::Lyapunov;
}

int problem_dim(const ProblemSelector& p) { return p.kind == "langevin" ? 2 : p.dim; }

}  // namespace

std::string_view to_string(ExperimentKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

ExperimentKind experiment_from_string(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  throw ConfigError("experiment", "unknown kind '" + std::string(name) + "'");
}

SdeProblem build_problem(const ProblemSelector& selector) {
  SdeProblem p;
  if (selector.kind == "cubic") {
    p = make_cubic_gradient(selector.dim);
  } else if (selector.kind == "langevin") {
    p = make_langevin();
  } else {
    throw ConfigError("problem.kind", "unknown problem '" + selector.kind + "'");
  }
  return selector.noise_scale == 1.0 ? p : with_diffusion_scale(p, selector.noise_scale);
}

void ExperimentConfig::resolve_defaults() {
  auto fill = [](auto& opt, auto value) {
    if (!opt) opt = value;
  };
  switch (kind) {
    case ExperimentKind::Converge:
      if (taus.empty()) taus = dyadic(2, 8);
      fill(horizon, 1.0);
      fill(paths, std::size_t{100});
      if (x0.empty()) x0.assign(problem_dim(problem), 0.5);
      break;
    case ExperimentKind::Ergodic:
      if (taus.empty()) taus = {0.05};
      fill(horizon, 200.0);
      fill(paths, std::size_t{200});
      break;
    case ExperimentKind::Langevin:
      if (taus.empty()) taus = dyadic(1, 6);
      fill(horizon, 200.0);
      fill(paths, std::size_t{200});
      break;
    case ExperimentKind::Steps:
      if (taus.empty()) taus = {0.1, 0.01};
      fill(horizon, 10.0);
      fill(paths, std::size_t{1000});
      break;
    case ExperimentKind::Martingale:
      fill(horizon, 0.0);
      fill(paths, std::size_t{100000});
      break;
    case ExperimentKind::Lyapunov:
      if (taus.empty()) taus = {0.05};
      fill(horizon, 0.0);
      fill(paths, lyapunov.chains);
      break;
  }
  if (x0.empty() && kind != ExperimentKind::Ergodic) x0.assign(problem_dim(problem), 0.0);
  if (!taus.empty()) stepper.tol = taus.front();
}

void ExperimentConfig::validate() const {
  auto require = [](bool ok, const char* field, const std::string& message) {
    if (!ok) throw ConfigError(field, message);
  };
  require(problem.kind == "cubic" || problem.kind == "langevin", "problem.kind",
          "must be cubic or langevin");
  require(problem.dim >= 1, "problem.dim", "must be >= 1");
  require(problem.noise_scale >= 0.0 && std::isfinite(problem.noise_scale), "problem.noise_scale",
          "must be finite and >= 0");
  require(pair == "euler" || pair == "symplectic", "pair", "must be euler or symplectic");
  require(pair != "symplectic" || problem.kind == "langevin", "pair",
          "the symplectic pair needs the langevin problem");
  if (kind == ExperimentKind::Langevin) {
    require(problem.kind == "langevin", "problem.kind", "langevin experiments need kind langevin");
    require(problem.noise_scale == 1.0, "problem.noise_scale",
            "langevin sweeps need the analytic density, so the scale must be 1");
  }
  if (kind == ExperimentKind::Ergodic) {
    require(problem.kind == "cubic", "problem.kind", "ergodic experiments use the cubic problem");
    require(problem.noise_scale == 1.0, "problem.noise_scale",
            "ergodic experiments need the analytic density, so the scale must be 1");
    require(!ergodic.dims.empty(), "ergodic.dims", "must not be empty");
    for (int d : ergodic.dims) require(d >= 1, "ergodic.dims", "entries must be >= 1");
    require(ergodic.lo < ergodic.hi, "ergodic.lo", "must be below ergodic.hi");
    require(ergodic.window > 0.0 && ergodic.flank > ergodic.window, "ergodic.flank",
            "need 0 < window < flank");
  }
  const bool entropy = stepper.controller.kind == ControllerKind::RelEntropy ||
                       stepper.controller.kind == ControllerKind::RelEntropyAsymptotic;
  require(!(entropy && (problem.kind == "langevin" || problem.noise_scale == 0.0)), "controller",
          "entropy controllers need a nondegenerate diffusion");

  require(stepper.dt_max > 0.0 && std::isfinite(stepper.dt_max), "dt_max", "must be > 0");
  require(stepper.k_init >= 0, "K", "must be >= 0");
  require(stepper.k_cap >= stepper.k_init, "k_cap", "must be >= K");
  require(stepper.k_cap <= 1000, "k_cap", "must be <= 1000");
  require(stepper.obs_spacing > 0.0, "delta", "must be > 0");
  if (needs_spacing(kind)) {
    require(stepper.obs_spacing > 5.0 * stepper.dt_max, "delta", "must exceed 5 * dt_max");
  }
  require(stepper.max_steps > 0, "max_steps", "must be > 0");

  if (kind != ExperimentKind::Martingale) {
    require(!taus.empty(), "tau", "must not be empty");
    for (double t : taus) require(t > 0.0 && std::isfinite(t), "tau", "entries must be > 0");
  }
  const SdeProblem prob = build_problem(problem);
  if (prob.coercivity && kind != ExperimentKind::Martingale) {
    for (double t : taus) {
      require(t < 2.0 * prob.coercivity->beta, "tau",
              fmt::format("must be below 2 beta = {}", 2.0 * prob.coercivity->beta));
    }
  }

  require(paths && *paths > 0, "paths", "must be > 0");
  require(horizon && *horizon >= 0.0 && std::isfinite(*horizon), "horizon", "must be >= 0");
  if (kind == ExperimentKind::Converge || kind == ExperimentKind::Steps ||
      kind == ExperimentKind::Ergodic || kind == ExperimentKind::Langevin) {
    require(*horizon > 0.0, "horizon", "must be > 0");
  }
  require(bins > 0, "bins", "must be > 0");
  require(burn_in >= 0.0 && burn_in < 1.0, "burn_in", "must lie in [0, 1)");
  require(threads >= 1, "threads", "must be >= 1");
  if (kind != ExperimentKind::Ergodic) {
    require(static_cast<int>(x0.size()) == prob.dim, "x0",
            fmt::format("needs {} entries", prob.dim));
  } else {
    require(x0.size() <= 1, "x0", "ergodic runs take a scalar start broadcast over dims");
  }
  for (double v : x0) require(std::isfinite(v), "x0", "entries must be finite");

  require(converge.ref_exponent >= 1 && converge.ref_exponent <= 30, "converge.ref_exponent",
          "must lie in [1, 30]");
  require(converge.grid_exponent >= 0 && converge.grid_exponent <= 24, "converge.grid_exponent",
          "must lie in [0, 24]");
  require(converge.radius > 0.0, "converge.radius", "must be > 0");
  for (double dt : langevin.fixed_dts) require(dt > 0.0, "langevin.fixed_dts", "entries must be > 0");

  if (steps.lemma) {
    const LemmaOptions& l = *steps.lemma;
    require(l.radius > 0.0, "steps.lemma.radius", "must be > 0");
    require(l.epsilon > 0.0, "steps.lemma.epsilon", "must be > 0");
    require(!l.tau || *l.tau > 0.0, "steps.lemma.tau", "must be > 0");
    require(l.paths > 0, "steps.lemma.paths", "must be > 0");
    require(l.horizon > 0.0, "steps.lemma.horizon", "must be > 0");
    require(l.samples > 0, "steps.lemma.samples", "must be > 0");
    require(l.inflation >= 1.0, "steps.lemma.inflation", "must be >= 1");
    require(problem.kind == "cubic", "steps.lemma", "the bound check needs a coercive gradient problem");
  }

  require(!martingale.policies.empty(), "martingale.policies", "must not be empty");
  require(martingale.cap > 0.0, "martingale.cap", "must be > 0");
  require(martingale.steps > 0, "martingale.steps", "must be > 0");
  require(!martingale.params.empty(), "martingale.params", "must not be empty");
  for (const auto& [a, b] : martingale.params) {
    require(a > 0.0 && b >= 0.0, "martingale.params", "need alpha > 0 and beta >= 0");
  }

  if (kind == ExperimentKind::Lyapunov) {
    require(prob.coercivity.has_value(), "problem", "lyapunov experiments need declared coercivity");
    require(lyapunov.chains > 0 && lyapunov.observations > 0, "lyapunov.observations",
            "chains and observations must be > 0");
    require(lyapunov.chains * (lyapunov.observations - 1) >= 1000, "lyapunov.observations",
            "need at least 1000 transitions in total");
    if (lyapunov.tail) {
      const TailOptions& t = *lyapunov.tail;
      require(t.paths > 0, "lyapunov.tail.paths", "must be > 0");
      require(t.horizon > 0.0, "lyapunov.tail.horizon", "must be > 0");
      require(!t.levels.empty(), "lyapunov.tail.levels", "must not be empty");
      require(t.noise_scale > 0.0, "lyapunov.tail.noise_scale", "must be > 0");
      require(t.dt_max > 0.0, "lyapunov.tail.dt_max", "must be > 0");
      require(t.tau > 0.0 && t.tau < 2.0 * prob.coercivity->beta, "lyapunov.tail.tau",
              "must lie in (0, 2 beta)");
      require(t.radius > 0.0, "lyapunov.tail.radius", "must be > 0");
    }
  }
}

// ---------------------------------------------------------------------------
// JSON

namespace {

class Reader {
 public:
  Reader(const json& node, std::string prefix) : node_(node), prefix_(std::move(prefix)) {
    if (!node_.is_object()) throw ConfigError(prefix_.empty() ? "config" : prefix_, "expected an object");
  }

  /// Throws on keys nobody asked for.
  void finish() const {
    for (const auto& [key, value] : node_.items()) {
      if (!seen_.count(key)) throw ConfigError(path(key), "unknown key");
    }
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return node_.contains(key);
  }

  const json& at(const std::string& key) { return node_.at(key); }
  std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

  void number(const std::string& key, double& out) {
    if (!has(key)) return;
    const json& v = node_.at(key);
    if (!v.is_number()) throw ConfigError(path(key), "expected a number");
    out = v.get<double>();
  }

  void number(const std::string& key, std::optional<double>& out) {
    if (!has(key)) return;
    double v = 0.0;
    number(key, v);
    out = v;
  }

  template <class Int>
  void integer(const std::string& key, Int& out) {
    if (!has(key)) return;
    const json& v = node_.at(key);
    if (!v.is_number_integer()) throw ConfigError(path(key), "expected an integer");
    if constexpr (std::is_unsigned_v<Int>) {
      if (!v.is_number_unsigned() && v.get<long long>() < 0) {
        throw ConfigError(path(key), "must be >= 0");
      }
    }
    out = v.get<Int>();
  }

  void count(const std::string& key, std::optional<std::size_t>& out) {
    if (!has(key)) return;
    std::size_t v = 0;
    integer(key, v);
    out = v;
  }

  void boolean(const std::string& key, bool& out) {
    if (!has(key)) return;
    const json& v = node_.at(key);
    if (!v.is_boolean()) throw ConfigError(path(key), "expected true or false");
    out = v.get<bool>();
  }

  void string(const std::string& key, std::string& out) {
    if (!has(key)) return;
    const json& v = node_.at(key);
    if (!v.is_string()) throw ConfigError(path(key), "expected a string");
    out = v.get<std::string>();
  }

  /// Accepts a number or an array of numbers.
  void numbers(const std::string& key, std::vector<double>& out) {
    if (!has(key)) return;
    const json& v = node_.at(key);
    out.clear();
    if (v.is_number()) {
      out.push_back(v.get<double>());
      return;
    }
    if (!v.is_array()) throw ConfigError(path(key), "expected a number or an array of numbers");
    if (v.empty()) throw ConfigError(path(key), "must not be empty");
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError(path(key), "expected numbers only");
      out.push_back(e.get<double>());
    }
  }

  void integers(const std::string& key, std::vector<int>& out) {
    if (!has(key)) return;
    const json& v = node_.at(key);
    out.clear();
    if (v.is_number_integer()) {
      out.push_back(v.get<int>());
      return;
    }
    if (!v.is_array()) throw ConfigError(path(key), "expected an integer or an array");
    if (v.empty()) throw ConfigError(path(key), "must not be empty");
    for (const auto& e : v) {
      if (!e.is_number_integer()) throw ConfigError(path(key), "expected integers only");
      out.push_back(e.get<int>());
    }
  }

 private:
  const json& node_;
  std::string prefix_;
  std::set<std::string> seen_;
};

void read_lemma(Reader& r, LemmaOptions& l) {
  r.number("radius", l.radius);
  r.number("epsilon", l.epsilon);
  r.number("tau", l.tau);
  r.integer("paths", l.paths);
  r.number("horizon", l.horizon);
  r.integer("samples", l.samples);
  r.number("inflation", l.inflation);
}

void read_tail(Reader& r, TailOptions& t) {
  r.integer("paths", t.paths);
  r.number("horizon", t.horizon);
  r.numbers("levels", t.levels);
  r.number("noise_scale", t.noise_scale);
  r.number("dt_max", t.dt_max);
  r.number("tau", t.tau);
  r.number("radius", t.radius);
}

template <class Fn>
void section(Reader& parent, const std::string& key, Fn&& fn) {
  if (!parent.has(key)) return;
  Reader r(parent.at(key), parent.path(key));
  fn(r);
  r.finish();
}

}  // namespace

ExperimentConfig parse_config(std::string_view json_text, std::optional<ExperimentKind> expected) {
  json doc;
  try {
    doc = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  ExperimentConfig c;
  Reader r(doc, "");
  std::string kind;
  r.string("experiment", kind);
  if (!kind.empty()) {
    c.kind = experiment_from_string(kind);
    if (expected && *expected != c.kind) {
      throw ConfigError("experiment", fmt::format("config is for '{}', not '{}'", kind,
                                                  to_string(*expected)));
    }
  } else if (expected) {
    c.kind = *expected;
  } else {
    throw ConfigError("experiment", "missing");
  }
  if (c.kind == ExperimentKind::Langevin) c.problem.kind = "langevin";

  section(r, "problem", [&](Reader& p) {
    p.string("kind", c.problem.kind);
    p.integer("dim", c.problem.dim);
    p.number("noise_scale", c.problem.noise_scale);
  });
  r.string("pair", c.pair);
  if (r.has("controller")) {
    std::string name;
    r.string("controller", name);
    try {
      c.stepper.controller.kind = controller_from_string(name);
    } catch (const Error&) {
      throw ConfigError("controller", "unknown controller '" + name + "'");
    }
  }
  r.numbers("tau", c.taus);
  r.number("dt_max", c.stepper.dt_max);
  r.integer("K", c.stepper.k_init);
  r.integer("k_cap", c.stepper.k_cap);
  r.number("delta", c.stepper.obs_spacing);
  r.integer("max_steps", c.stepper.max_steps);
  r.number("horizon", c.horizon);
  r.count("paths", c.paths);
  r.integer("bins", c.bins);
  r.number("burn_in", c.burn_in);
  r.numbers("x0", c.x0);
  r.integer("seed", c.seed);
  r.integer("threads", c.threads);
  r.string("output", c.output);

  section(r, "converge", [&](Reader& s) {
    s.integer("ref_exponent", c.converge.ref_exponent);
    s.integer("grid_exponent", c.converge.grid_exponent);
    s.number("radius", c.converge.radius);
    s.boolean("reference_check", c.converge.reference_check);
    s.boolean("timing", c.converge.timing);
  });
  section(r, "ergodic", [&](Reader& s) {
    s.integers("dims", c.ergodic.dims);
    s.number("lo", c.ergodic.lo);
    s.number("hi", c.ergodic.hi);
    s.number("window", c.ergodic.window);
    s.number("flank", c.ergodic.flank);
  });
  section(r, "langevin", [&](Reader& s) { s.numbers("fixed_dts", c.langevin.fixed_dts); });
  section(r, "steps", [&](Reader& s) {
    section(s, "lemma", [&](Reader& l) {
      c.steps.lemma.emplace();
      read_lemma(l, *c.steps.lemma);
    });
  });
  section(r, "martingale", [&](Reader& s) {
    if (s.has("policies")) {
      const json& v = s.at("policies");
      if (!v.is_array()) throw ConfigError("martingale.policies", "expected an array of names");
      c.martingale.policies.clear();
      for (const auto& e : v) {
        if (!e.is_string()) throw ConfigError("martingale.policies", "expected names");
        try {
          c.martingale.policies.push_back(policy_from_string(e.get<std::string>()));
        } catch (const Error&) {
          throw ConfigError("martingale.policies", "unknown policy '" + e.get<std::string>() + "'");
        }
      }
    }
    s.number("cap", c.martingale.cap);
    s.integer("steps", c.martingale.steps);
    if (s.has("params")) {
      const json& v = s.at("params");
      if (!v.is_array()) throw ConfigError("martingale.params", "expected [[alpha, beta], ...]");
      c.martingale.params.clear();
      for (const auto& e : v) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
          throw ConfigError("martingale.params", "expected [[alpha, beta], ...]");
        }
        c.martingale.params.emplace_back(e[0].get<double>(), e[1].get<double>());
      }
    }
  });
  section(r, "lyapunov", [&](Reader& s) {
    s.integer("chains", c.lyapunov.chains);
    s.integer("observations", c.lyapunov.observations);
    section(s, "tail", [&](Reader& t) {
      c.lyapunov.tail.emplace();
      read_tail(t, *c.lyapunov.tail);
    });
  });
  r.finish();

  if (c.kind == ExperimentKind::Lyapunov && c.paths) c.lyapunov.chains = *c.paths;
  c.resolve_defaults();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& file,
                             std::optional<ExperimentKind> expected) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("config", "cannot read " + file.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), expected);
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = to_string(c.kind);
  j["problem"] = {{"kind", c.problem.kind}, {"dim", c.problem.dim}, {"noise_scale", c.problem.noise_scale}};
  j["pair"] = c.pair;
  j["controller"] = to_string(c.stepper.controller.kind);
  j["tau"] = c.taus;
  j["dt_max"] = c.stepper.dt_max;
  j["K"] = c.stepper.k_init;
  j["k_cap"] = c.stepper.k_cap;
  j["delta"] = c.stepper.obs_spacing;
  j["max_steps"] = c.stepper.max_steps;
  j["horizon"] = c.horizon.value_or(0.0);
  j["paths"] = c.paths.value_or(0);
  j["bins"] = c.bins;
  j["burn_in"] = c.burn_in;
  j["x0"] = c.x0;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["output"] = c.output;
  switch (c.kind) {
    case ExperimentKind::Converge:
      j["converge"] = {{"ref_exponent", c.converge.ref_exponent},
                       {"grid_exponent", c.converge.grid_exponent},
                       {"radius", c.converge.radius},
                       {"reference_check", c.converge.reference_check},
                       {"timing", c.converge.timing}};
      break;
    case ExperimentKind::Ergodic:
      j["ergodic"] = {{"dims", c.ergodic.dims},
                      {"lo", c.ergodic.lo},
                      {"hi", c.ergodic.hi},
                      {"window", c.ergodic.window},
                      {"flank", c.ergodic.flank}};
      break;
    case ExperimentKind::Langevin:
      j["langevin"] = {{"fixed_dts", c.langevin.fixed_dts}};
      break;
    case ExperimentKind::Steps:
      if (c.steps.lemma) {
        const LemmaOptions& l = *c.steps.lemma;
        json lj = {{"radius", l.radius}, {"epsilon", l.epsilon}};
        if (l.tau) lj["tau"] = *l.tau;
        lj["paths"] = l.paths;
        lj["horizon"] = l.horizon;
        lj["samples"] = l.samples;
        lj["inflation"] = l.inflation;
        j["steps"] = {{"lemma", lj}};
      }
      break;
    case ExperimentKind::Martingale: {
      json policies = json::array();
      for (auto p : c.martingale.policies) policies.push_back(to_string(p));
      json params = json::array();
      for (const auto& [a, b] : c.martingale.params) params.push_back({a, b});
      j["martingale"] = {{"policies", policies},
                         {"cap", c.martingale.cap},
                         {"steps", c.martingale.steps},
                         {"params", params}};
      break;
    }
    case ExperimentKind::Lyapunov: {
      json lj = {{"chains", c.lyapunov.chains}, {"observations", c.lyapunov.observations}};
      if (c.lyapunov.tail) {
        const TailOptions& t = *c.lyapunov.tail;
        lj["tail"] = {{"paths", t.paths},         {"horizon", t.horizon},
                      {"levels", t.levels},       {"noise_scale", t.noise_scale},
                      {"dt_max", t.dt_max},       {"tau", t.tau},
                      {"radius", t.radius}};
      }
      j["lyapunov"] = lj;
      break;
    }
  }
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Artifacts

std::string sha256_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error("sha256_file: cannot read " + file.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error("sha256_file: digest init failed");
  }
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

int ExperimentResult::exit_code() const {
  switch (status) {
    case RunStatus::Ok: return 0;
    case RunStatus::Failed: return 1;
    case RunStatus::Error: return 3;
  }
  return 3;
}

namespace {

class Artifacts {
 public:
  explicit Artifacts(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  void write(const std::string& name, const std::function<void(std::ostream&)>& body) {
    const auto file = dir_ / name;
    {
      std::ofstream out(file, std::ios::binary | std::ios::trunc);
      if (!out) throw Error("cannot write " + file.string());
      body(out);
      out.flush();
      if (!out) throw Error("write failed for " + file.string());
    }
    files_.push_back({name, sha256_file(file)});
  }

  const std::filesystem::path& dir() const { return dir_; }
  const std::vector<ArtifactFile>& files() const { return files_; }

 private:
  std::filesystem::path dir_;
  std::vector<ArtifactFile> files_;
};

struct Outcome {
  bool failed = false;
  std::string message;

  void fail(const std::string& why) {
    if (!failed) message = why;
    failed = true;
  }
};

std::string suffix(const std::vector<double>& taus, std::size_t i) {
  return taus.size() > 1 ? fmt::format("_t{}", i) : std::string();
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

MethodPair build_pair(const ExperimentConfig& c, const SdeProblem& problem) {
  if (c.pair == "symplectic") return symplectic_pair(default_langevin_spec());
  return euler_pair(problem);
}

void run_converge(const ExperimentConfig& c, Artifacts& out) {
  const SdeProblem problem = build_problem(c.problem);
  const MethodPair pair = build_pair(c, problem);
  StrongErrorConfig sc;
  sc.taus = c.taus;
  sc.horizon = *c.horizon;
  sc.paths = *c.paths;
  sc.ref_exponent = c.converge.ref_exponent;
  sc.grid_exponent = c.converge.grid_exponent;
  sc.radius = c.converge.radius;
  sc.reference_check = c.converge.reference_check;
  sc.seed = c.seed;
  sc.x0 = to_vector(c.x0);
  sc.stepper = c.stepper;
  sc.threads = c.threads;
  const StrongErrorReport report = strong_error(problem, pair, sc, c.converge.timing);
  out.write("strong_error.csv", [&](std::ostream& os) { write_strong_error_csv(os, report); });
}

void run_ergodic(const ExperimentConfig& c, Artifacts& out) {
  struct Row {
    int dim;
    double tau;
    double tv;
    double steps_per_unit_time;
    int k_min;
    double share;
  };
  std::vector<Row> rows;
  std::vector<std::tuple<int, double, double, double>> proms;  // dim, tau, point, prominence
  const double s3 = 1.0 / std::sqrt(3.0);
  for (std::size_t ti = 0; ti < c.taus.size(); ++ti) {
    for (int d : c.ergodic.dims) {
      const SdeProblem problem = make_cubic_gradient(d);
      const MethodPair pair = euler_pair(problem);
      StepperConfig sc = c.stepper;
      sc.tol = c.taus[ti];
      EnsembleConfig ec;
      ec.paths = *c.paths;
      ec.horizon = *c.horizon;
      ec.burn_in = c.burn_in;
      ec.axes = {0};
      ec.lo = {c.ergodic.lo};
      ec.hi = {c.ergodic.hi};
      ec.bins = c.bins;
      ec.profile_axis = 0;
      ec.x0 = Vector::Constant(d, c.x0.empty() ? 0.0 : c.x0.front());
      ec.seed = c.seed;
      ec.threads = c.threads;
      const EnsembleResult r = run_ensemble(pair, sc, ec);
      const auto rho = normalized_marginal(problem, 0);
      const std::string tag = fmt::format("_d{}{}", d, suffix(c.taus, ti));
      out.write("density" + tag + ".csv",
                [&](std::ostream& os) { write_density_csv(os, r.marginals[0], rho); });
      out.write("profile" + tag + ".csv", [&](std::ostream& os) { write_profile_csv(os, *r.profile); });
      out.write("step_histogram" + tag + ".csv",
                [&](std::ostream& os) { write_step_histogram_csv(os, r.steps); });
      const int kmin = r.steps.min_occupied();
      rows.push_back({d, sc.tol, tv_distance(r.marginals[0], rho), r.steps_per_unit_time(), kmin,
                      r.steps.time_share(kmin)});
      for (double p : {-1.0, -s3, 0.0, s3, 1.0}) {
        proms.emplace_back(d, sc.tol, p,
                           profile_prominence(*r.profile, p, c.ergodic.window, c.ergodic.flank));
      }
    }
  }
  out.write("ergodic_summary.csv", [&](std::ostream& os) {
    csv::Writer w(os);
    w.header({"dim", "tau", "tv_error", "steps_per_unit_time", "k_min", "time_share_k_min"});
    for (const Row& row : rows) {
      w.cell(row.dim).cell(row.tau).cell(row.tv).cell(row.steps_per_unit_time).cell(row.k_min);
      w.cell(row.share);
      w.end_row();
    }
  });
  out.write("prominence.csv", [&](std::ostream& os) {
    csv::Writer w(os);
    w.header({"dim", "tau", "point", "prominence"});
    for (const auto& [d, tau, p, v] : proms) {
      w.cell(d).cell(tau).cell(p).cell(v);
      w.end_row();
    }
  });
}

void run_langevin(const ExperimentConfig& c, Artifacts& out) {
  const LangevinSpec spec = default_langevin_spec();
  const SdeProblem problem = make_langevin(spec);
  SweepConfig sc;
  sc.taus = c.taus;
  sc.fixed_dts = c.langevin.fixed_dts;
  sc.stepper = c.stepper;
  sc.ensemble.paths = *c.paths;
  sc.ensemble.horizon = *c.horizon;
  sc.ensemble.burn_in = c.burn_in;
  sc.ensemble.bins = c.bins;
  sc.ensemble.x0 = to_vector(c.x0);
  sc.ensemble.seed = c.seed;
  sc.ensemble.threads = c.threads;
  const auto rows = tv_sweep(problem, spec, sc);
  out.write("sweep.csv", [&](std::ostream& os) { write_sweep_csv(os, rows); });
}

struct LawTally {
  std::uint64_t steps = 0;
  std::uint64_t ratio_violations = 0;
  std::uint64_t metric_violations = 0;
  double worst_metric_ratio = 0.0;  // metric / threshold
  StepHistogram histogram;

  void merge(const LawTally& o) {
    steps += o.steps;
    ratio_violations += o.ratio_violations;
    metric_violations += o.metric_violations;
    worst_metric_ratio = std::max(worst_metric_ratio, o.worst_metric_ratio);
    histogram.merge(o.histogram);
  }
};

void run_lemma(const ExperimentConfig& c, const SdeProblem& problem, const MethodPair& pair,
               Artifacts& out, Outcome& outcome) {
  const LemmaOptions& l = *c.steps.lemma;
  const DriftDiagnostics diag =
      estimate_diagnostics(problem, l.radius, l.epsilon, c.stepper.dt_max, l.samples, l.inflation);
  StepperConfig sc = c.stepper;
  sc.tol = l.tau.value_or(l.epsilon * l.epsilon / (24.0 * diag.K_R));
  // dt_{-1} must sit below 2 tau / eps.
  int K = sc.k_init;
  while (K < sc.k_cap && !(sc.dt_of(K) < 2.0 * sc.tol / l.epsilon)) ++K;
  sc.k_init = K;
  std::vector<LemmaReport> parts(l.paths);
  const Vector x0 = to_vector(c.x0);
  parallel_for(l.paths, c.threads, [&](std::size_t i) {
    LemmaBoundChecker checker(diag, sc.tol, sc.dt_of(sc.k_init));
    checker.begin_path(i);
    NoiseStream stream(c.seed, i);
    AdaptiveStepper engine(sc, pair);
    ChainState state = ChainState::initial(x0, sc);
    StepRecord record;
    Vector x_prev(problem.dim);
    while (state.t < l.horizon) {
      if (state.n >= sc.max_steps) throw MaxStepsExceeded("lemma check: step limit");
      x_prev = state.x;
      const std::uint64_t n = state.n;
      engine.step(state, record, &stream);
      checker.on_step(n, x_prev, record.dt);
    }
    parts[i] = checker.report();
  });
  LemmaReport report = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) report.merge(parts[i]);
  out.write("lemma.csv", [&](std::ostream& os) {
    csv::Writer w(os);
    w.header({"status", "radius", "epsilon", "K_R_sampled", "K_R", "tau", "tau_limit", "K",
              "step_bound", "paths", "horizon", "steps_total", "steps_checked", "segments",
              "segments_unconditioned", "steps_unconditioned", "unconditioned_over_bound",
              "max_ratio", "violations", "verdict"});
    w.cell(to_string(report.status)).cell(l.radius).cell(l.epsilon).cell(diag.K_R_sampled);
    w.cell(diag.K_R).cell(report.tau).cell(report.tau_limit).cell(sc.k_init).cell(report.step_bound);
    w.cell(static_cast<unsigned long long>(report.paths)).cell(l.horizon);
    w.cell(static_cast<unsigned long long>(report.steps_total));
    w.cell(static_cast<unsigned long long>(report.steps_checked));
    w.cell(static_cast<unsigned long long>(report.segments));
    w.cell(static_cast<unsigned long long>(report.segments_unconditioned));
    w.cell(static_cast<unsigned long long>(report.steps_unconditioned));
    w.cell(static_cast<unsigned long long>(report.unconditioned_over_bound));
    w.cell(report.max_ratio).cell(static_cast<unsigned long long>(report.violation_count));
    w.cell(std::string_view(report.passed() ? "pass" : "fail"));
    w.end_row();
  });
  if (!report.passed()) {
    outcome.fail(fmt::format("timestep bound violated on {} steps", report.violation_count));
  }
}

void run_steps(const ExperimentConfig& c, Artifacts& out, Outcome& outcome) {
  const SdeProblem problem = build_problem(c.problem);
  const MethodPair pair = build_pair(c, problem);
  const Vector x0 = to_vector(c.x0);
  std::vector<LawTally> tallies;
  for (std::size_t ti = 0; ti < c.taus.size(); ++ti) {
    StepperConfig sc = c.stepper;
    sc.tol = c.taus[ti];
    const double threshold = sc.controller.threshold(sc.tol);
    std::vector<LawTally> parts(*c.paths);
    parallel_for(*c.paths, c.threads, [&](std::size_t i) {
      LawTally& t = parts[i];
      NoiseStream stream(c.seed, i);
      AdaptiveStepper engine(sc, pair);
      ChainState state = ChainState::initial(x0, sc);
      StepRecord record;
      Vector x_prev(problem.dim);
      double dt_prev = sc.dt_of(sc.k_init);
      while (state.t < *c.horizon) {
        if (state.n >= sc.max_steps) throw MaxStepsExceeded("steps: step limit");
        x_prev = state.x;
        engine.step(state, record, &stream);
        ++t.steps;
        t.histogram.add(record.k, record.dt);
        if (record.dt > std::min(2.0 * dt_prev, sc.dt_max)) ++t.ratio_violations;
        const double m = metric(sc.controller, pair, x_prev, record.dt);
        if (!(m <= threshold)) ++t.metric_violations;
        t.worst_metric_ratio = std::max(t.worst_metric_ratio, m / threshold);
        dt_prev = record.dt;
      }
    });
    LawTally total;
    for (const auto& p : parts) total.merge(p);
    out.write("step_histogram" + suffix(c.taus, ti) + ".csv",
              [&](std::ostream& os) { write_step_histogram_csv(os, total.histogram); });
    if (total.ratio_violations + total.metric_violations > 0) {
      outcome.fail(fmt::format("step laws violated at tau = {}", sc.tol));
    }
    tallies.push_back(std::move(total));
  }
  out.write("step_laws.csv", [&](std::ostream& os) {
    csv::Writer w(os);
    w.header({"tau", "paths", "horizon", "steps", "ratio_violations", "metric_violations",
              "max_metric_over_threshold", "verdict"});
    for (std::size_t i = 0; i < tallies.size(); ++i) {
      const LawTally& t = tallies[i];
      w.cell(c.taus[i]).cell(*c.paths).cell(*c.horizon).cell(static_cast<unsigned long long>(t.steps));
      w.cell(static_cast<unsigned long long>(t.ratio_violations));
      w.cell(static_cast<unsigned long long>(t.metric_violations)).cell(t.worst_metric_ratio);
      w.cell(std::string_view(t.ratio_violations + t.metric_violations == 0 ? "pass" : "fail"));
      w.end_row();
    }
  });
  if (c.steps.lemma) run_lemma(c, problem, pair, out, outcome);
}

void run_martingale(const ExperimentConfig& c, Artifacts& out, Outcome& outcome) {
  std::vector<BoundReport> reports;
  for (VariancePolicy policy : c.martingale.policies) {
    auto part = martingale_study(PolicySpec{policy, c.martingale.cap}, c.martingale.steps, *c.paths,
                                 c.martingale.params, c.seed, c.threads);
    reports.insert(reports.end(), part.begin(), part.end());
  }
  out.write("martingale_bounds.csv", [&](std::ostream& os) { write_bound_csv(os, reports); });
  for (const auto& r : reports) {
    if (!r.passed()) {
      outcome.fail(fmt::format("{} bound exceeded for policy {} at alpha = {}, beta = {}",
                               to_string(r.estimate), r.policy, r.alpha, r.beta));
    }
  }
}

void run_lyapunov(const ExperimentConfig& c, Artifacts& out) {
  const SdeProblem problem = build_problem(c.problem);
  const MethodPair pair = build_pair(c, problem);
  const Vector x0 = to_vector(c.x0);
  const std::size_t J = c.lyapunov.observations;
  std::vector<ObservationChain> chains(c.lyapunov.chains);
  parallel_for(chains.size(), c.threads, [&](std::size_t i) {
    NoiseStream stream(c.seed, i);
    chains[i] = observe(x0, c.stepper, pair, &stream, J);
  });
  const NoiseBounds nb = estimate_noise_bounds(problem, 10.0);
  const LyapunovReport rep = foster_lyapunov_fit(chains, *problem.coercivity, c.stepper, nb.sigma2);
  out.write("observations.csv", [&](std::ostream& os) {
    csv::Writer w(os);
    w.header({"chain", "j", "t", "l", "y_norm2"});
    for (std::size_t i = 0; i < chains.size(); ++i) {
      for (std::size_t j = 0; j < chains[i].entries.size(); ++j) {
        const Observation& o = chains[i].entries[j];
        w.cell(i).cell(j + 1).cell(o.t).cell(o.l).cell(o.y.squaredNorm());
        w.end_row();
      }
    }
  });
  out.write("lyapunov.csv", [&](std::ostream& os) {
    csv::Writer w(os);
    w.header({"slope", "slope_stderr", "intercept", "intercept_stderr", "samples", "slope_bound",
              "intercept_bound", "alpha_tilde", "beta_tilde", "gamma_bar", "gamma_minus",
              "delta_minus", "delta_plus", "sigma2", "contracts"});
    w.cell(rep.slope).cell(rep.slope_stderr).cell(rep.intercept).cell(rep.intercept_stderr);
    w.cell(rep.samples).cell(rep.slope_bound).cell(rep.intercept_bound).cell(rep.alpha_tilde);
    w.cell(rep.beta_tilde).cell(rep.gamma_bar).cell(rep.gamma_minus).cell(rep.delta_minus);
    w.cell(rep.delta_plus).cell(nb.sigma2).cell(std::string_view(rep.contracts() ? "yes" : "no"));
    w.end_row();
  });
  if (!c.lyapunov.tail) return;

  const TailOptions& t = *c.lyapunov.tail;
  const SdeProblem noisy = with_diffusion_scale(problem, t.noise_scale);
  const MethodPair noisy_pair = euler_pair(noisy);
  StepperConfig sc = c.stepper;
  sc.tol = t.tau;
  sc.dt_max = t.dt_max;
  const NoiseBounds bounds = estimate_noise_bounds(noisy, t.radius);
  const double C0 = moment_constant(*problem.coercivity, t.tau, bounds.sigma2, t.dt_max);
  const auto excursions =
      moment_excursions(noisy_pair, sc, x0, t.horizon, t.paths, C0, c.seed, c.threads);
  const MomentReport m = exp_moment_tail(excursions, t.levels, C0, bounds);
  out.write("moment_tail.csv", [&](std::ostream& os) {
    csv::Writer w(os);
    w.header({"level", "exceedances", "frequency", "paths"});
    for (std::size_t i = 0; i < m.levels.size(); ++i) {
      w.cell(m.levels[i]).cell(static_cast<unsigned long long>(m.exceedances[i]));
      w.cell(m.frequencies[i]).cell(m.paths);
      w.end_row();
    }
  });
  out.write("moment_tail_fit.csv", [&](std::ostream& os) {
    csv::Writer w(os);
    w.header({"C0", "sigma2", "a", "noise_scale", "dt_max", "tau", "slope", "slope_stderr",
              "intercept", "fit_valid", "strictly_decreasing"});
    w.cell(m.C0).cell(m.sigma2).cell(m.a).cell(t.noise_scale).cell(t.dt_max).cell(t.tau);
    w.cell(m.slope).cell(m.slope_stderr).cell(m.intercept);
    w.cell(std::string_view(m.fit_valid ? "yes" : "no"));
    w.cell(std::string_view(m.log_frequencies_strictly_decreasing() ? "yes" : "no"));
    w.end_row();
  });
}

void write_manifest(const ExperimentConfig& c, const ExperimentResult& r) {
  json files = json::array();
  for (const auto& f : r.files) files.push_back({{"name", f.name}, {"sha256", f.sha256}});
  json m;
  m["experiment"] = to_string(c.kind);
  m["config"] = json::parse(config_to_json(c));
  m["seed"] = c.seed;
  m["files"] = files;
  m["status"] = r.status == RunStatus::Ok ? "ok" : "FAILED";
  if (!r.message.empty()) m["message"] = r.message;
  m["versions"] = {{"adaptsde", kVersion},
                   {"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION,
                                         EIGEN_MINOR_VERSION)}};
  m["threads"] = c.threads;
  m["wall_time_seconds"] = r.wall_seconds;
  std::ofstream out(r.directory / "manifest.json", std::ios::binary | std::ios::trunc);
  out << m.dump(2) << '\n';
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  ExperimentResult result;
  result.directory = config.output;
  Artifacts out(result.directory);
  Outcome outcome;
  try {
    switch (config.kind) {
      case ExperimentKind::Converge: run_converge(config, out); break;
      case ExperimentKind::Ergodic: run_ergodic(config, out); break;
      case ExperimentKind::Langevin: run_langevin(config, out); break;
      case ExperimentKind::Steps: run_steps(config, out, outcome); break;
      case ExperimentKind::Martingale: run_martingale(config, out, outcome); break;
      case ExperimentKind::Lyapunov: run_lyapunov(config, out); break;
    }
    if (outcome.failed) {
      result.status = RunStatus::Failed;
      result.message = outcome.message;
    }
  } catch (const std::exception& e) {
    result.status = RunStatus::Error;
    result.message = e.what();
  }
  result.files = out.files();
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_manifest(config, result);
  return result;
}

}  // namespace adaptsde
