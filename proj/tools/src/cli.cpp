#include "qdy/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "qdy/explorer.hpp"
#include "qdy/models.hpp"
#include "qdy/oracle.hpp"
#include "qdy/protocol.hpp"
#include "qdy/restrictions.hpp"

namespace qdy::cli {

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunRequest {
  std::string model;
  std::string scenario;
  std::string threat;
  std::string auth;
  bool order = false;
  std::string view = "bob";
  std::size_t max_depth = ExplorationBounds{}.max_depth;
  std::size_t max_states = ExplorationBounds{}.max_states;
  std::size_t max_candidates = ExplorationBounds{}.max_candidates;
  unsigned workers = 1;
  std::string search = "bfs";
  std::string format = "text";
};

void setup_logging() {
  auto logger = spdlog::get("qdy");
  if (!logger) {
    logger = spdlog::stderr_color_mt("qdy");
    spdlog::set_default_logger(logger);
  }
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("QDY_LOG")) spdlog::set_level(spdlog::level::from_str(env));
}

std::string capitalised(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

ExplorationBounds bounds_of(const RunRequest& req) {
  ExplorationBounds b;
  b.max_depth = req.max_depth;
  b.max_states = req.max_states;
  b.max_candidates = req.max_candidates;
  b.workers = std::max(1u, req.workers);
  b.order = req.search == "dfs" ? SearchOrder::DepthFirst : SearchOrder::BreadthFirst;
  return b;
}

ChannelAssumptions channels_of(const RunRequest& req) {
  try {
    return ChannelAssumptions::from_auth_list(req.auth, req.order);
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
}

ThreatRuleSet preset_of(const std::string& name) {
  try {
    return threat_preset(name);
  } catch (const UnknownPreset& e) {
    throw UsageError(e.what());
  }
}

std::pair<ProtocolSpec, std::string> resolve(const RunRequest& req) {
  if (req.model.empty() == req.scenario.empty()) throw UsageError("give exactly one of --model or --scenario");
  if (!req.scenario.empty()) {
    std::ifstream in(req.scenario);
    if (!in) throw UsageError("cannot read scenario file " + req.scenario);
    std::stringstream text;
    text << in.rdbuf();
    ScenarioDocument doc = parse_scenario(text.str());
    std::string threat = req.threat.empty() ? doc.threat_model.value_or(doc.spec.default_threat) : req.threat;
    return {doc.spec, threat};
  }
  const std::string view = capitalised(req.view);
  try {
    ProtocolSpec spec = builtin(req.model, channels_of(req), view);
    if (spec.scenario.protocol != "qkd" && (!req.auth.empty() || req.order)) {
      throw UsageError("--auth and --order apply to qkd models only");
    }
    return {spec, req.threat.empty() ? spec.default_threat : req.threat};
  } catch (const UnknownModel& e) {
    throw UsageError(e.what());
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
}

int verify(const RunRequest& req, std::ostream& out) {
  auto [spec, threat_name] = resolve(req);
  const ThreatRuleSet threat = effective_threat(spec, preset_of(threat_name));
  spdlog::info("verifying {} ({}) under {}", spec.name, spec.property.str(), threat.str());
  const Verdict v = explore(spec, threat, bounds_of(req));
  spdlog::info("{} after {} states in {:.3f} s", verdict_name(v.kind), v.stats.states, v.stats.seconds);
  if (req.format == "json") {
    out << verdict_to_json(spec, threat, v).dump(2) << "\n";
  } else if (req.format == "dot") {
    if (v.attack) {
      out << trace_to_dot(spec, *v.attack);
    } else {
      out << "digraph verdict {\n  label=\"" << spec.name << ": " << verdict_name(v.kind) << "\";\n}\n";
    }
  } else {
    out << verdict_to_text(spec, threat, v);
  }
  return v.exit_code();
}

int list_models(std::ostream& out) {
  for (const CatalogEntry& e : catalog()) out << std::left << std::setw(8) << e.name << "  " << e.description << "\n";
  out << "\nthreat models:";
  for (const std::string& p : threat_preset_names()) out << " " << p << "=" << threat_preset(p).str();
  out << "\n";
  return 0;
}

std::string rational_str(const Rational& r) {
  return std::to_string(r.numerator()) + (r.denominator() == 1 ? "" : "/" + std::to_string(r.denominator()));
}

int budget(int n, std::ostream& out) {
  Budgets b;
  try {
    b = default_budgets(n);
  } catch (const InvalidParameter& e) {
    throw UsageError(e.what());
  }
  out << "n = " << n << "\n";
  out << "caps (" << b.half << "," << b.quarter << ")\n";
  out << "guesses per bitstring and role: " << b.half << "\n";
  out << "guesses per same-value group: " << b.quarter << "\n";
  if (n <= 24) {
    out << "P(at least k of n positions match a fixed string):\n";
    for (int k = 0; k <= n; ++k) {
      out << "  k=" << k << "  " << rational_str(exact_tail_probability(n, k)) << (k == n / 2 ? "  (k = n/2)" : "") << "\n";
    }
  }
  return 0;
}

int oracle_validate(std::ostream& out) {
  const oracle::Report r = oracle::symbolic_semantics_report();
  out << r.str();
  out << (r.passed() ? "all checks passed\n" : "validation failed\n");
  return r.passed() ? 0 : 1;
}

int oracle_bell(std::ostream& out) {
  static const char* names[] = {"|00>", "|01>", "|10>", "|11>"};
  for (std::size_t i = 0; i < 4; ++i) out << names[i] << " -> " << oracle::bell_circuit(i).str() << "\n";
  return 0;
}

std::vector<std::string> auth_combinations() {
  static const char* flags[] = {"done", "bases", "matchingBases", "verif"};
  std::vector<std::string> out;
  for (unsigned mask = 0; mask < 16; ++mask) {
    std::string csv;
    for (unsigned i = 0; i < 4; ++i) {
      if (mask & (1u << i)) csv += (csv.empty() ? "" : ",") + std::string(flags[i]);
    }
    out.push_back(csv);
  }
  return out;
}

int matrix(const RunRequest& base, std::ostream& out) {
  RunRequest probe = base;
  auto [spec0, _] = resolve(probe);
  const bool qkd = spec0.scenario.protocol == "qkd";
  std::vector<std::string> rows = qkd ? auth_combinations() : std::vector<std::string>{""};
  nlohmann::json results = nlohmann::json::array();
  int worst = 0;
  if (base.format != "json") {
    out << spec0.name << "  " << spec0.property.str() << (base.order ? "  +Order" : "") << "\n";
    out << std::left << std::setw(40) << "Auth(...)";
    for (const std::string& p : threat_preset_names()) out << std::setw(14) << p;
    out << "\n";
  }
  for (const std::string& auth : rows) {
    RunRequest req = base;
    req.auth = auth;
    if (base.format != "json") out << std::left << std::setw(40) << ("Auth(" + auth + ")");
    for (const std::string& preset : threat_preset_names()) {
      auto [spec, __] = resolve(req);
      const ThreatRuleSet threat = effective_threat(spec, threat_preset(preset));
      std::string cell;
      try {
        const Verdict v = explore(spec, threat, bounds_of(req));
        cell = std::string(verdict_name(v.kind));
        results.push_back({{"auth", auth}, {"threat", preset}, {"verdict", cell}, {"states", v.stats.states},
                           {"seconds", v.stats.seconds},
                           {"classification", v.attack ? v.attack->classification : std::vector<std::string>{}}});
      } catch (const ResourceExhausted&) {
        cell = "StateCap";
        worst = kRuntimeError;
        results.push_back({{"auth", auth}, {"threat", preset}, {"verdict", cell}});
      }
      if (base.format != "json") out << std::setw(14) << cell << std::flush;
    }
    if (base.format != "json") out << "\n";
  }
  if (base.format == "json") {
    out << nlohmann::json{{"schema", "qdy.matrix/1"}, {"model", spec0.name}, {"order", base.order}, {"results", results}}.dump(2)
        << "\n";
  }
  return worst;
}

void add_run_options(CLI::App* cmd, RunRequest& req, bool with_threat) {
  cmd->add_option("--model", req.model, "built-in model (see list-models)");
  cmd->add_option("--scenario", req.scenario, "scenario JSON file")->check(CLI::ExistingFile);
  if (with_threat) cmd->add_option("--threat", req.threat, "passive|forge|epr|guess|full");
  if (with_threat) cmd->add_option("--auth", req.auth, "authentic channels: csv of done,bases,matchingBases,verif");
  cmd->add_flag("--order", req.order, "Bob measures before Alice reveals her bases");
  cmd->add_option("--view", req.view, "secrecy viewpoint")->check(CLI::IsMember({"alice", "bob"}, CLI::ignore_case));
  cmd->add_option("--max-depth", req.max_depth, "explicit steps per execution")->check(CLI::PositiveNumber);
  cmd->add_option("--max-states", req.max_states, "distinct states before giving up")->check(CLI::PositiveNumber);
  cmd->add_option("--max-candidates", req.max_candidates, "intruder inputs per step")->check(CLI::PositiveNumber);
  cmd->add_option("--workers", req.workers, "exploration threads")->check(CLI::Range(1u, 256u));
  cmd->add_option("--search", req.search, "bfs|dfs")->check(CLI::IsMember({"bfs", "dfs"}));
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  setup_logging();
  CLI::App app{"qdy: bounded symbolic verifier with a quantum Dolev-Yao intruder"};
  app.require_subcommand(1);
  RunRequest req;
  int n = 0;

  CLI::App* verify_cmd = app.add_subcommand("verify", "explore a model under a threat model");
  add_run_options(verify_cmd, req, true);
  verify_cmd->add_option("--format", req.format, "text|json|dot")->check(CLI::IsMember({"text", "json", "dot"}));

  app.add_subcommand("list-models", "list built-in models and threat models");

  CLI::App* budget_cmd = app.add_subcommand("budget", "guess budgets and exact tail probabilities");
  budget_cmd->add_option("--n", n, "security parameter")->required();

  CLI::App* oracle_cmd = app.add_subcommand("oracle", "state-vector checks of the symbolic semantics");
  oracle_cmd->require_subcommand(1);
  oracle_cmd->add_subcommand("validate", "measurement and EPR checks");
  oracle_cmd->add_subcommand("bell", "Bell circuit on the four basis states");

  CLI::App* matrix_cmd = app.add_subcommand("matrix", "every threat model against every channel assumption");
  RunRequest mreq;
  mreq.model = "qkd-2q";
  add_run_options(matrix_cmd, mreq, false);
  matrix_cmd->add_option("--format", mreq.format, "text|json")->check(CLI::IsMember({"text", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : kUsageError;
  }

  try {
    if (verify_cmd->parsed()) return verify(req, out);
    if (app.got_subcommand("list-models")) return list_models(out);
    if (budget_cmd->parsed()) return budget(n, out);
    if (oracle_cmd->parsed()) {
      return oracle_cmd->got_subcommand("validate") ? oracle_validate(out) : oracle_bell(out);
    }
    if (matrix_cmd->parsed()) {
      if (!mreq.scenario.empty()) mreq.model.clear();
      return matrix(mreq, out);
    }
  } catch (const UsageError& e) {
    err << "qdy: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "qdy: error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kUsageError;
}

}  // namespace qdy::cli
