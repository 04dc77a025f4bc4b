#include "qdy/deduction.hpp"

#include <algorithm>
#include <cctype>

namespace qdy {

namespace {

std::string lower(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '_' || c == '-') continue;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

bool subset(const std::set<GuessKey>& a, const std::set<GuessKey>& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

bool subset(const std::set<std::string>& a, const std::set<std::string>& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

bool all_const_args(const Term& t) {
  return std::all_of(t.args().begin() + 1, t.args().end(), [](const Term& a) { return a.is_const(); });
}

}  // namespace

std::string_view threat_rule_name(ThreatRule r) {
  switch (r) {
    case ThreatRule::IdQ:
      return "ID_Q";
    case ThreatRule::Measure:
      return "Measure";
    case ThreatRule::Forge:
      return "Forge";
    case ThreatRule::Epr:
      return "Epr";
    case ThreatRule::EprLeak:
      return "EprLeak";
    case ThreatRule::Guess:
      return "Guess";
    case ThreatRule::Complem:
      return "Complem";
  }
  return "?";
}

std::optional<ThreatRule> threat_rule_from_name(std::string_view name) {
  const std::string key = lower(name);
  for (ThreatRule r : {ThreatRule::IdQ, ThreatRule::Measure, ThreatRule::Forge, ThreatRule::Epr, ThreatRule::EprLeak,
                       ThreatRule::Guess, ThreatRule::Complem}) {
    if (lower(threat_rule_name(r)) == key) return r;
  }
  return std::nullopt;
}

ThreatRuleSet ThreatRuleSet::with(ThreatRule r) const {
  ThreatRuleSet out = *this;
  out.rules_.insert(r);
  return out;
}

ThreatRuleSet ThreatRuleSet::without(ThreatRule r) const {
  ThreatRuleSet out = *this;
  out.rules_.erase(r);
  return out;
}

bool ThreatRuleSet::subset_of(const ThreatRuleSet& other) const {
  return std::includes(other.rules_.begin(), other.rules_.end(), rules_.begin(), rules_.end());
}

std::string ThreatRuleSet::str() const {
  std::string out = "{";
  for (ThreatRule r : rules_) {
    if (out.size() > 1) out += ',';
    out += threat_rule_name(r);
  }
  return out + "}";
}

std::string_view rule_name(Rule r) {
  switch (r) {
    case Rule::Member:
      return "Member";
    case Rule::PublicConst:
      return "PublicConst";
    case Rule::Compose:
      return "Compose";
    case Rule::Project:
      return "Project";
    case Rule::Decrypt:
      return "Decrypt";
    case Rule::Complem:
      return "Complem";
    case Rule::Guess:
      return "Guess";
    case Rule::EprLeak:
      return "Epr-Leak";
    case Rule::IdQ:
      return "ID_Q";
    case Rule::Measure:
      return "Measure";
    case Rule::Forge:
      return "Forge";
    case Rule::Epr:
      return "Epr";
  }
  return "?";
}

DerivationPtr Derivation::leaf(Term conclusion, Rule rule, std::string ref) {
  auto d = std::make_shared<Derivation>();
  d->conclusion = std::move(conclusion);
  d->rule = rule;
  d->ref = std::move(ref);
  return d;
}

DerivationPtr Derivation::node(Term conclusion, Rule rule, std::vector<DerivationPtr> premises, std::string ref) {
  auto d = std::make_shared<Derivation>();
  d->conclusion = std::move(conclusion);
  d->rule = rule;
  d->premises = std::move(premises);
  d->ref = std::move(ref);
  return d;
}

void Derivation::collect(std::set<GuessKey>& guesses, std::set<std::string>& consumed,
                         std::set<std::string>& epr_ids) const {
  if (rule == Rule::Guess && guess) guesses.insert(*guess);
  if (rule == Rule::IdQ) consumed.insert(ref);
  if (rule == Rule::Epr) epr_ids.insert(ref);
  for (const DerivationPtr& p : premises) p->collect(guesses, consumed, epr_ids);
}

bool Derivation::uses(Rule r) const { return count(r) > 0; }

std::size_t Derivation::count(Rule r) const {
  std::size_t c = rule == r ? 1 : 0;
  for (const DerivationPtr& p : premises) c += p->count(r);
  return c;
}

std::size_t Derivation::size() const {
  std::size_t c = 1;
  for (const DerivationPtr& p : premises) c += p->size();
  return c;
}

nlohmann::json Derivation::to_json() const {
  nlohmann::json j;
  j["rule"] = std::string(rule_name(rule));
  j["conclusion"] = conclusion.str();
  if (guess) j["guess"] = {{"bitstring", guess->bitstring}, {"role", guess->role}, {"position", guess->position}};
  if (!ref.empty()) j["ref"] = ref;
  j["premises"] = nlohmann::json::array();
  for (const DerivationPtr& p : premises) j["premises"].push_back(p->to_json());
  return j;
}

void KnowledgeState::add_qubit(std::string id, Term q) {
  if (qubit(id)) throw TermError("duplicate qubit id " + id);
  delta.push_back(DeltaEntry{std::move(id), std::move(q), QubitStatus::Available});
}

const DeltaEntry* KnowledgeState::qubit(std::string_view id) const {
  for (const DeltaEntry& e : delta) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

DeltaEntry* KnowledgeState::qubit(std::string_view id) {
  for (DeltaEntry& e : delta) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

bool KnowledgeState::consume(std::string_view id) {
  DeltaEntry* e = qubit(id);
  if (!e || e->status != QubitStatus::Available) return false;
  e->status = QubitStatus::Consumed;
  return true;
}

void KnowledgeState::expire_available() {
  for (DeltaEntry& e : delta) {
    if (e.status == QubitStatus::Available) e.status = QubitStatus::Expired;
  }
}

std::size_t KnowledgeState::available() const {
  return static_cast<std::size_t>(
      std::count_if(delta.begin(), delta.end(), [](const DeltaEntry& e) { return e.status == QubitStatus::Available; }));
}

bool Deduction::dominates(const Deduction& other) const {
  return subset(guesses, other.guesses) && subset(consumed, other.consumed) && subset(epr_ids, other.epr_ids);
}

const Deduction* DeductionResult::cheapest() const {
  const Deduction* best = nullptr;
  for (const Deduction& d : deductions) {
    if (!best || d.guesses.size() + d.consumed.size() < best->guesses.size() + best->consumed.size()) best = &d;
  }
  return best;
}

void pareto_insert(std::vector<Deduction>& frontier, Deduction d) {
  for (const Deduction& e : frontier) {
    if (e.dominates(d)) return;
  }
  frontier.erase(std::remove_if(frontier.begin(), frontier.end(), [&](const Deduction& e) { return d.dominates(e); }),
                 frontier.end());
  frontier.push_back(std::move(d));
}

Deducer::Deducer(DeductionContext ctx) : ctx_(std::move(ctx)) {
  if (!ctx_.state) throw TermError("deduction context without knowledge state");
  analyse();
}

bool Deducer::admissible(const std::set<GuessKey>& guesses) const {
  if (!ctx_.restrictions || guesses.empty()) return true;
  static const GuessLedger empty;
  return qdy::admissible(ctx_.ledger ? *ctx_.ledger : empty, guesses, *ctx_.restrictions);
}

namespace {

// Zero-cost synthesis from analysed knowledge, used to open encryptions.
DerivationPtr synth(const Term& t, const std::map<Term, DerivationPtr>& known, int depth) {
  if (auto it = known.find(t); it != known.end()) return it->second;
  if (t.is_const()) return Derivation::leaf(t, Rule::PublicConst);
  if (!t.is_app() || depth <= 0) return nullptr;
  if (t.symbol() == Symbol::Qubit || t.symbol() == Symbol::QubitEpr) return nullptr;
  std::vector<DerivationPtr> premises;
  for (const Term& a : t.args()) {
    DerivationPtr p = synth(a, known, depth - 1);
    if (!p) return nullptr;
    premises.push_back(std::move(p));
  }
  return Derivation::node(t, Rule::Compose, std::move(premises), std::string(symbol_name(t.symbol())));
}

}  // namespace

void Deducer::analyse() {
  for (const Term& t : ctx_.state->gamma) analysed_.emplace(t, Derivation::leaf(t, Rule::Member));
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<std::pair<Term, DerivationPtr>> snapshot(analysed_.begin(), analysed_.end());
    for (const auto& [t, d] : snapshot) {
      if (t.is_app(Symbol::Pair)) {
        for (std::size_t i = 0; i < 2; ++i) {
          if (!analysed_.count(t.arg(i))) {
            analysed_.emplace(t.arg(i), Derivation::node(t.arg(i), Rule::Project, {d}, i == 0 ? "fst" : "snd"));
            changed = true;
          }
        }
      } else if (t.is_app(Symbol::Senc) && !analysed_.count(t.arg(0))) {
        if (DerivationPtr key = synth(t.arg(1), analysed_, ctx_.depth_bound)) {
          analysed_.emplace(t.arg(0), Derivation::node(t.arg(0), Rule::Decrypt, {d, key}));
          changed = true;
        }
      }
    }
  }
}

std::vector<Term> Deducer::class_variants(const Term& t) const {
  std::vector<Term> out{t};
  if (!t.is_app(Symbol::Bit) || !all_const_args(t)) return out;
  const bool cross = ctx_.cfg.cross_position_bitstrings.count(t.arg(1).label()) > 0;
  std::vector<std::string> roles = ctx_.universe.roles;
  std::vector<std::string> positions = cross ? ctx_.universe.positions : std::vector<std::string>{};
  if (std::find(roles.begin(), roles.end(), t.arg(3).label()) == roles.end()) roles.push_back(t.arg(3).label());
  if (positions.empty() || std::find(positions.begin(), positions.end(), t.arg(2).label()) == positions.end()) {
    positions.push_back(t.arg(2).label());
  }
  for (const std::string& p : positions) {
    for (const std::string& r : roles) {
      Term v = bit(t.arg(0), t.arg(1).label(), p, r, t.arg(4).label());
      if (!(v == t)) out.push_back(v);
    }
  }
  return out;
}

std::vector<Deduction> Deducer::derive(const Term& t, int depth, bool& bound_hit, bool& cut) {
  if (auto it = memo_.find(t); it != memo_.end() && it->second.depth >= depth) {
    bound_hit = bound_hit || it->second.bound_hit;
    return it->second.results;
  }
  if (in_progress_.count(t)) {
    cut = true;
    return {};
  }
  in_progress_.insert(t);
  std::vector<Deduction> out;
  bool local_hit = false;
  bool local_cut = false;

  if (auto it = analysed_.find(t); it != analysed_.end()) {
    pareto_insert(out, Deduction{it->second, {}, {}, {}});
  } else if (t.is_const()) {
    pareto_insert(out, Deduction{Derivation::leaf(t, Rule::PublicConst), {}, {}, {}});
  }
  const bool free = !out.empty();

  if (!free && t.is_app(Symbol::Bit) && t.arg(0) == ctx_.seed && all_const_args(t)) {
    const Term& value = t.arg(4);
    if (ctx_.rules.has(ThreatRule::Guess)) {
      GuessKey key{t.arg(1).label(), t.arg(3).label(), t.arg(2).label()};
      auto d = std::make_shared<Derivation>();
      d->conclusion = t;
      d->rule = Rule::Guess;
      d->guess = key;
      d->premises.push_back(Derivation::leaf(value, Rule::PublicConst));
      std::set<GuessKey> cost;
      if (!ctx_.ledger || !ctx_.ledger->contains(key)) cost.insert(key);
      if (admissible(cost)) pareto_insert(out, Deduction{d, cost, {}, {}});
    }
    if (ctx_.rules.has(ThreatRule::Complem)) {
      if (auto flipped = flip_value(value)) {
        Term other = bit(t.arg(0), t.arg(1).label(), t.arg(2).label(), t.arg(3).label(), flipped->label());
        for (Deduction& s : derive(other, depth, local_hit, local_cut)) {
          s.derivation = Derivation::node(t, Rule::Complem, {s.derivation, Derivation::leaf(value, Rule::PublicConst)});
          pareto_insert(out, std::move(s));
        }
      }
    }
  }

  if (!free && ctx_.rules.has(ThreatRule::EprLeak)) {
    for (const auto& [id, rec] : ctx_.state->epr_log) {
      if (!(rec.outcome == t)) continue;
      std::vector<Term> bases = class_variants(rec.base);
      for (const auto& [known, _] : analysed_) {
        if (eq_b(known, rec.base, ctx_.cfg) && std::find(bases.begin(), bases.end(), known) == bases.end()) {
          bases.push_back(known);
        }
      }
      for (const Term& b : bases) {
        for (Deduction& s : derive(b, depth, local_hit, local_cut)) {
          s.derivation = Derivation::node(t, Rule::EprLeak, {s.derivation}, id);
          pareto_insert(out, std::move(s));
        }
      }
    }
  }

  if (!free) {
    for (const auto& [known, d] : analysed_) {
      if (!known.is_app(Symbol::Senc) || !(known.arg(0) == t)) continue;
      for (Deduction& k : derive(known.arg(1), depth - 1, local_hit, local_cut)) {
        k.derivation = Derivation::node(t, Rule::Decrypt, {d, k.derivation});
        pareto_insert(out, std::move(k));
      }
    }
  }

  if (!free && t.is_app() && t.symbol() != Symbol::Qubit && t.symbol() != Symbol::QubitEpr) {
    if (depth <= 0) {
      local_hit = true;
    } else {
      std::vector<Deduction> combos{Deduction{nullptr, {}, {}, {}}};
      std::vector<std::vector<DerivationPtr>> premises{{}};
      for (const Term& a : t.args()) {
        std::vector<Deduction> sub = derive(a, depth - 1, local_hit, local_cut);
        std::vector<Deduction> next;
        std::vector<std::vector<DerivationPtr>> next_premises;
        for (std::size_t i = 0; i < combos.size(); ++i) {
          for (const Deduction& s : sub) {
            Deduction c = combos[i];
            c.guesses.insert(s.guesses.begin(), s.guesses.end());
            c.consumed.insert(s.consumed.begin(), s.consumed.end());
            c.epr_ids.insert(s.epr_ids.begin(), s.epr_ids.end());
            if (!admissible(c.guesses)) continue;
            next.push_back(std::move(c));
            next_premises.push_back(premises[i]);
            next_premises.back().push_back(s.derivation);
          }
        }
        combos = std::move(next);
        premises = std::move(next_premises);
        if (combos.empty()) break;
      }
      for (std::size_t i = 0; i < combos.size(); ++i) {
        combos[i].derivation =
            Derivation::node(t, Rule::Compose, std::move(premises[i]), std::string(symbol_name(t.symbol())));
        pareto_insert(out, std::move(combos[i]));
      }
    }
  }

  in_progress_.erase(t);
  const bool any_free = std::any_of(out.begin(), out.end(), [](const Deduction& d) { return d.zero_cost(); });
  if (any_free) local_hit = false;
  if (!local_cut) memo_[t] = Memo{depth, out, local_hit};
  bound_hit = bound_hit || local_hit;
  cut = cut || local_cut;
  return out;
}

DeductionResult Deducer::classical(const Term& target) {
  DeductionResult r;
  bool cut = false;
  r.deductions = derive(target, ctx_.depth_bound, r.depth_bound_exceeded, cut);
  return r;
}

DeductionResult Deducer::quantum(const Term& target) {
  DeductionResult r;
  bool cut = false;
  if (ctx_.rules.has(ThreatRule::IdQ)) {
    for (const DeltaEntry& e : ctx_.state->delta) {
      if (e.status == QubitStatus::Available && e.qubit == target) {
        pareto_insert(r.deductions, Deduction{Derivation::leaf(target, Rule::IdQ, e.id), {}, {e.id}, {}});
      }
    }
  }
  auto combine = [&](const Term& a, const Term& b, Rule rule, const std::string& ref) {
    std::vector<Deduction> da = derive(a, ctx_.depth_bound - 1, r.depth_bound_exceeded, cut);
    if (da.empty()) return;
    std::vector<Deduction> db = derive(b, ctx_.depth_bound - 1, r.depth_bound_exceeded, cut);
    for (const Deduction& x : da) {
      for (const Deduction& y : db) {
        Deduction c;
        c.guesses = x.guesses;
        c.guesses.insert(y.guesses.begin(), y.guesses.end());
        if (!admissible(c.guesses)) continue;
        if (!ref.empty()) c.epr_ids.insert(ref);
        c.derivation = Derivation::node(target, rule, {x.derivation, y.derivation}, ref);
        pareto_insert(r.deductions, std::move(c));
      }
    }
  };
  if (target.is_app(Symbol::Qubit) && ctx_.rules.has(ThreatRule::Forge)) {
    combine(target.arg(0), target.arg(1), Rule::Forge, "");
  }
  if (target.is_app(Symbol::QubitEpr) && ctx_.rules.has(ThreatRule::Epr)) {
    const Term& id = target.arg(2);
    if (id.is_name() && !ctx_.state->epr_log.count(id.label())) combine(target.arg(0), target.arg(1), Rule::Epr, id.label());
  }
  return r;
}

DeductionResult deduce_classical(const DeductionContext& ctx, const Term& target) {
  return Deducer(ctx).classical(target);
}

DeductionResult deduce_quantum(const DeductionContext& ctx, const Term& target) { return Deducer(ctx).quantum(target); }

HonestMeasurement measure_honest(const Term& q, const Term& base, const InterchangeabilityConfig& cfg,
                                 NameSupply& names, std::string_view hint) {
  Term data;
  Term encoded_in;
  if (q.is_app(Symbol::Qubit)) {
    data = q.arg(0);
    encoded_in = q.arg(1);
  } else if (q.is_app(Symbol::QubitEpr)) {
    encoded_in = q.arg(0);
    data = q.arg(1);
  } else {
    throw NotAQubit("cannot measure " + q.str());
  }
  HonestMeasurement m;
  m.outcome = eq_b(encoded_in, base, cfg) ? data : names.fresh(hint);
  if (q.is_app(Symbol::QubitEpr)) m.epr_event = std::make_pair(q.arg(2).label(), EprRecord{m.outcome, base});
  return m;
}

Term attacker_seed() { return Term::constant("eve"); }

Term attacker_bit(std::string_view value) { return bit(attacker_seed(), "eve", "0", "Eve", value); }

bool is_attacker_bit(const Term& t) { return t.is_app(Symbol::Bit) && t.arg(0) == attacker_seed(); }

}  // namespace qdy
