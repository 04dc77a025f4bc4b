#include "qdy/explorer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>
#include <unordered_set>

namespace qdy {

namespace {

struct Choice {
  Term term;
  std::set<GuessKey> guesses;
  std::set<std::string> consumed;
  std::set<std::string> epr_ids;
  DerivationPtr derivation;
  int rank = 0;  // forward, forge, EPR
  std::string desc;
};

bool covers(const std::set<GuessKey>& small, const std::set<GuessKey>& big) {
  return std::includes(big.begin(), big.end(), small.begin(), small.end());
}

// Keeps one option per cost among those not dominated by an earlier one.
void pareto_add(std::vector<Choice>& group, Choice c) {
  for (const Choice& e : group) {
    if (covers(e.guesses, c.guesses)) return;
  }
  group.erase(std::remove_if(group.begin(), group.end(), [&](const Choice& e) { return covers(c.guesses, e.guesses); }),
              group.end());
  group.push_back(std::move(c));
}

std::string guesses_str(const std::set<GuessKey>& g) {
  if (g.empty()) return "";
  std::string out = " [";
  for (const GuessKey& k : g) out += (out.size() > 2 ? "," : "") + k.str();
  return out + "]";
}

std::string join(const std::vector<Term>& ts) {
  std::string out = "[";
  for (std::size_t i = 0; i < ts.size(); ++i) out += (i ? "," : "") + ts[i].str();
  return out + "]";
}

// Candidate terms interchangeable with one of `refs`: the universe variants
// plus whatever analysed knowledge happens to be interchangeable.
std::vector<Term> interchangeable_terms(Deducer& ded, const std::vector<Term>& refs) {
  std::vector<Term> out;
  auto add = [&](const Term& t) {
    if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
  };
  const InterchangeabilityConfig& cfg = ded.context().cfg;
  for (const Term& r : refs) {
    for (const Term& v : ded.class_variants(r)) add(v);
    for (const auto& [known, _] : ded.analysed()) {
      if (eq_b(known, r, cfg)) add(known);
    }
  }
  return out;
}

std::vector<Choice> deductions_of(Deducer& ded, const Term& t, bool& bound_hit) {
  DeductionResult r = ded.classical(t);
  bound_hit = bound_hit || (r.depth_bound_exceeded && !r.derivable());
  std::vector<Choice> out;
  for (Deduction& d : r.deductions) out.push_back(Choice{t, d.guesses, {}, {}, d.derivation, 0, t.str()});
  return out;
}

std::string match_mask(const Term& t, const std::vector<Term>& refs, const InterchangeabilityConfig& cfg) {
  std::string mask;
  for (const Term& r : refs) mask += eq_b(t, r, cfg) ? '1' : '0';
  return mask;
}

// Intruder values for a compare hole, one Pareto group per observation.
std::vector<Choice> compare_choices(Deducer& ded, const std::vector<Term>& refs, bool observable, bool& bound_hit) {
  const InterchangeabilityConfig& cfg = ded.context().cfg;
  std::vector<std::pair<std::string, std::vector<Choice>>> groups;
  auto group = [&](const std::string& key) -> std::vector<Choice>& {
    for (auto& [k, g] : groups) {
      if (k == key) return g;
    }
    groups.emplace_back(key, std::vector<Choice>{});
    return groups.back().second;
  };
  std::vector<Term> terms = interchangeable_terms(ded, refs);
  terms.push_back(attacker_bit("0"));
  for (const Term& t : terms) {
    const std::string key = observable ? t.str() : match_mask(t, refs, cfg);
    for (Choice& c : deductions_of(ded, t, bound_hit)) pareto_add(group(key), std::move(c));
  }
  std::vector<Choice> out;
  for (auto& [_, g] : groups) {
    for (Choice& c : g) out.push_back(std::move(c));
  }
  return out;
}

std::vector<Term> resolve_refs(const std::vector<Ref>& refs, const Env& env) {
  std::vector<Term> out;
  for (const Ref& r : refs) {
    if (r.each) {
      for (const Term& t : env.list(r.var)) out.push_back(t);
    } else if (!r.index.empty()) {
      auto it = env.terms.find(r.index);
      if (it == env.terms.end()) continue;
      auto idx = position_index(it->second);
      const auto& list = env.list(r.var);
      if (idx && *idx >= 1 && *idx <= list.size()) out.push_back(list[*idx - 1]);
    } else if (env.lists.count(r.var)) {
      for (const Term& t : env.list(r.var)) out.push_back(t);
    } else {
      out.push_back(env.term(r.var));
    }
  }
  return out;
}

std::vector<std::vector<Term>> subsets(const std::vector<Term>& set, std::size_t min) {
  std::vector<std::vector<Term>> out;
  const std::size_t n = set.size();
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    std::vector<Term> s;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) s.push_back(set[i]);
    }
    if (s.size() >= min && !s.empty()) out.push_back(std::move(s));
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.size() > b.size(); });
  return out;
}

// What the receiving role can tell apart about a message: exact values of
// member and subset holes, and which references each compared value matches.
std::string observe(const act::Recv& recv, const Env& role_env, const Term& message, const InterchangeabilityConfig& cfg) {
  if (recv.constant) return message.str();
  const std::size_t comps = recv.holes.size() + (recv.each ? 1 : 0);
  auto parts = untuple(message, comps);
  if (!parts) return "unparsed:" + message.str();
  Env env = role_env;
  std::string key;
  for (std::size_t i = 0; i < recv.holes.size(); ++i) {
    const Hole& h = recv.holes[i];
    const Term& v = (*parts)[i];
    if (h.kind == HoleKind::Compare && !h.observable) {
      key += match_mask(v, resolve_refs(h.refs, env), cfg);
    } else {
      key += v.str();
    }
    key += '|';
    env.terms[h.bind] = v;
  }
  if (recv.each) {
    const auto& over = env.list(recv.each->over);
    auto values = untuple(parts->back(), over.size());
    if (!values) return "unparsed:" + message.str();
    for (std::size_t j = 0; j < over.size(); ++j) {
      Env slot = env;
      slot.terms["@"] = over[j];
      key += match_mask((*values)[j], resolve_refs({Ref{recv.each->list, "@", false}}, slot), cfg);
    }
  }
  return key;
}

std::map<std::string, std::string> channel_senders(const ProtocolSpec& spec) {
  std::map<std::string, std::string> out;
  for (const Role& r : spec.roles) {
    for (const Action& a : r.program) {
      if (const auto* s = std::get_if<act::Send>(&a)) out[s->channel] = r.name;
    }
  }
  return out;
}

const Term& qubit_base(const Term& q) { return q.is_app(Symbol::Qubit) ? q.arg(1) : q.arg(0); }

}  // namespace

std::string_view step_kind_name(StepKind k) {
  switch (k) {
    case StepKind::Deliver:
      return "deliver";
    case StepKind::DeliverQubits:
      return "deliver-qubits";
    case StepKind::Measure:
      return "measure";
    case StepKind::Release:
      return "release";
    case StepKind::Violation:
      return "violation";
  }
  return "?";
}

std::string_view verdict_name(VerdictKind k) {
  switch (k) {
    case VerdictKind::Attack:
      return "Attack";
    case VerdictKind::Exhausted:
      return "Exhausted";
    case VerdictKind::Inconclusive:
      return "Inconclusive";
  }
  return "?";
}

int Verdict::exit_code() const {
  switch (kind) {
    case VerdictKind::Exhausted:
      return 0;
    case VerdictKind::Attack:
      return 1;
    case VerdictKind::Inconclusive:
      return 2;
  }
  return 3;
}

nlohmann::json TraceStep::to_json() const {
  nlohmann::json j;
  j["index"] = index;
  j["kind"] = std::string(step_kind_name(kind));
  j["actor"] = actor;
  if (!recipient.empty()) j["recipient"] = recipient;
  if (!channel.empty()) j["channel"] = channel;
  if (message) j["message"] = message->str();
  if (!slots.empty()) j["slots"] = slots;
  j["injected"] = injected;
  j["guesses"] = nlohmann::json::array();
  for (const GuessKey& k : guesses) j["guesses"].push_back(k.str());
  j["consumed"] = std::vector<std::string>(consumed.begin(), consumed.end());
  j["eprIds"] = std::vector<std::string>(epr_ids.begin(), epr_ids.end());
  j["derivations"] = nlohmann::json::array();
  for (const DerivationPtr& d : derivations) j["derivations"].push_back(d->to_json());
  j["effects"] = effects;
  j["label"] = label;
  return j;
}

std::vector<TraceStep> ExecutionState::trace() const {
  std::vector<TraceStep> out;
  for (const HistoryNode* h = history.get(); h; h = h->prev.get()) out.push_back(h->step);
  std::reverse(out.begin(), out.end());
  return out;
}

std::string ExecutionState::canonical() const {
  std::string s;
  s.reserve(2048);
  for (const RoleState& r : roles) {
    s += "R" + std::to_string(r.pc) + ":" + std::string(role_status_name(r.status)) + "{";
    for (const auto& [k, v] : r.env.terms) s += k + "=" + v.str() + ";";
    for (const auto& [k, v] : r.env.lists) s += k + "=" + join(v) + ";";
    s += "}";
  }
  s += "G{";
  for (const Term& t : knowledge.gamma) s += t.str() + ";";
  s += "}D{";
  for (const DeltaEntry& e : knowledge.delta) s += e.id + "=" + e.qubit.str() + "/" + std::to_string(static_cast<int>(e.status)) + ";";
  s += "}S{";
  for (const auto& [id, rec] : knowledge.epr_log) s += id + "=" + rec.outcome.str() + "@" + rec.base.str() + ";";
  s += "}L{";
  for (const GuessKey& k : ledger.keys()) s += k.str() + ";";
  s += "}M{";
  for (const auto& [c, m] : mailbox) s += c + "=" + m.str() + ";";
  s += "}E{";
  for (const EventRecord& e : events) {
    s += e.role + "." + e.label + "(";
    for (const auto& a : e.args) s += join(a);
    s += ");";
  }
  return s + "}";
}

Explorer::Explorer(const ProtocolSpec& spec, ThreatRuleSet threat, ExplorationBounds bounds)
    : spec_(spec), threat_(std::move(threat)), bounds_(bounds) {
  for (ThreatRule r : spec_.forbidden_rules) threat_ = threat_.without(r);
}

DeductionContext Explorer::context(const ExecutionState& s) const {
  DeductionContext ctx;
  ctx.state = &s.knowledge;
  ctx.rules = threat_;
  ctx.cfg = spec_.cfg;
  ctx.universe = spec_.universe;
  ctx.seed = spec_.seed;
  ctx.ledger = &s.ledger;
  ctx.restrictions = &spec_.scenario.restrictions;
  ctx.depth_bound = bounds_.deduction_depth;
  return ctx;
}

ExecutionState Explorer::initial() const {
  ExecutionState s;
  for (const Role& r : spec_.roles) s.roles.push_back(RoleState{0, r.initial, RoleStatus::Running});
  for (const Term& t : spec_.initial_knowledge) s.knowledge.learn(t);
  TraceStep boot;
  settle(s, boot);
  return s;
}

void Explorer::apply(ExecutionState& s, const StepOutcome& out, TraceStep& step) const {
  for (const Output& o : out.outputs) {
    if (o.quantum) {
      s.knowledge.add_qubit(o.qubit_id, o.message);
      step.effects.push_back("quantum " + o.qubit_id + " " + o.message.str());
    } else {
      s.mailbox[o.channel] = o.message;
      if (intruder_reads(spec_.mode(o.channel))) s.knowledge.learn(o.message);
      step.effects.push_back("send " + o.channel + " " + o.message.str());
    }
  }
  for (const auto& [id, rec] : out.epr_events) {
    s.knowledge.epr_log[id] = rec;
    step.effects.push_back("epr " + id + " measured as " + rec.outcome.str() + " in " + rec.base.str());
  }
  for (const EventRecord& e : out.events) {
    std::string d = "event " + e.role + "." + e.label + "(";
    for (std::size_t i = 0; i < e.args.size(); ++i) d += (i ? "," : "") + join(e.args[i]);
    step.effects.push_back(d + ")");
    s.events.push_back(e);
  }
  if (!out.note.empty()) step.effects.push_back(out.note);
}

void Explorer::settle(ExecutionState& s, TraceStep& step) const {
  bool progress = true;
  while (progress) {
    progress = false;
    for (std::size_t r = 0; r < spec_.roles.size(); ++r) {
      const Role& role = spec_.roles[r];
      while (s.roles[r].status == RoleStatus::Running && s.roles[r].pc < role.program.size()) {
        const Action& a = role.program[s.roles[r].pc];
        if (waits_for_input(a)) break;
        if (const auto* send = std::get_if<act::Send>(&a); send && send->ordered) break;
        StepOutcome out = step_role(role, s.roles[r], {}, s.names, spec_.cfg);
        s.roles[r] = out.next;
        apply(s, out, step);
        progress = true;
      }
    }
  }
}

bool Explorer::release_enabled(const ExecutionState& s) const {
  for (std::size_t r = 0; r < spec_.roles.size(); ++r) {
    const auto& prog = spec_.roles[r].program;
    for (std::size_t pc = 0; pc < prog.size(); ++pc) {
      if (std::holds_alternative<act::RecvMeasure>(prog[pc]) && s.roles[r].pc <= pc &&
          s.roles[r].status == RoleStatus::Running) {
        return false;
      }
    }
  }
  return true;
}

void Explorer::commit(const ExecutionState& from, ExecutionState next, TraceStep step, Successors& out) const {
  settle(next, step);
  step.index = from.depth;
  next.depth = from.depth + 1;
  next.history = std::make_shared<const HistoryNode>(HistoryNode{std::move(step), from.history});
  out.states.push_back(std::move(next));
}

void Explorer::classical_inputs(const ExecutionState& s, std::size_t r, Deducer& ded, Successors& out) const {
  const Role& role = spec_.roles[r];
  const RoleState& rs = s.roles[r];
  const auto& recv = std::get<act::Recv>(role.program[rs.pc]);
  const ChannelMode mode = spec_.mode(recv.channel);
  const auto senders = channel_senders(spec_);

  struct Candidate {
    Term message;
    std::set<GuessKey> guesses;
    std::vector<DerivationPtr> derivations;
    bool injected = true;
  };
  std::vector<Candidate> cands;
  std::optional<Term> forward;
  if (auto it = s.mailbox.find(recv.channel); it != s.mailbox.end()) forward = it->second;
  if (forward) cands.push_back(Candidate{*forward, {}, {}, false});

  if (intruder_writes(mode)) {
    if (recv.constant) {
      auto d = ded.classical(*recv.constant);
      if (d.derivable() && (!forward || !(*forward == *recv.constant))) {
        cands.push_back(Candidate{*recv.constant, {}, {d.deductions.front().derivation}, true});
      }
    } else {
      std::vector<Term> values;
      std::vector<Term> each_values;
      std::vector<DerivationPtr> derivs;
      std::set<GuessKey> cost;
      Env env = rs.env;
      std::map<std::string, std::vector<Choice>> cache;
      auto choices_for = [&](const std::vector<Term>& refs, bool observable) -> const std::vector<Choice>& {
        std::string key = (observable ? "o" : "m") + join(refs);
        auto it = cache.find(key);
        if (it == cache.end()) it = cache.emplace(key, compare_choices(ded, refs, observable, out.deduction_bound_hit)).first;
        return it->second;
      };
      std::function<void(std::size_t)> each_slot;
      std::function<void(std::size_t)> hole;
      auto emit = [&]() {
        if (cands.size() >= bounds_.max_candidates) {
          out.truncated = true;
          return;
        }
        std::optional<std::vector<Term>> ev;
        if (recv.each) ev = each_values;
        Term msg = assemble_message(recv, values, ev);
        if (forward && msg == *forward) return;
        cands.push_back(Candidate{msg, cost, derivs, true});
      };
      auto pick = [&](const Choice& c, const std::function<void()>& rest) {
        std::set<GuessKey> saved = cost;
        cost.insert(c.guesses.begin(), c.guesses.end());
        if (qdy::admissible(s.ledger, cost, spec_.scenario.restrictions)) {
          derivs.push_back(c.derivation);
          rest();
          derivs.pop_back();
        }
        cost = std::move(saved);
      };
      each_slot = [&](std::size_t j) {
        if (out.truncated) return;
        const auto& idx = env.list(recv.each->over);
        if (j == idx.size()) {
          emit();
          return;
        }
        Env slot = env;
        slot.terms["@"] = idx[j];
        for (const Choice& c : choices_for(resolve_refs({Ref{recv.each->list, "@", false}}, slot), false)) {
          each_values.push_back(c.term);
          pick(c, [&] { each_slot(j + 1); });
          each_values.pop_back();
        }
      };
      hole = [&](std::size_t i) {
        if (out.truncated) return;
        if (i == recv.holes.size()) {
          if (recv.each) {
            each_slot(0);
          } else {
            emit();
          }
          return;
        }
        const Hole& h = recv.holes[i];
        if (h.kind == HoleKind::Member) {
          for (const Term& e : env.list(h.set)) {
            env.terms[h.bind] = e;
            values.push_back(e);
            hole(i + 1);
            values.pop_back();
          }
          env.terms.erase(h.bind);
        } else if (h.kind == HoleKind::Subset) {
          for (const auto& sub : subsets(env.list(h.set), h.min_size)) {
            env.lists[h.bind] = sub;
            values.push_back(tuple(sub));
            hole(i + 1);
            values.pop_back();
          }
          env.lists.erase(h.bind);
        } else {
          for (const Choice& c : choices_for(resolve_refs(h.refs, env), h.observable)) {
            env.terms[h.bind] = c.term;
            values.push_back(c.term);
            pick(c, [&] { hole(i + 1); });
            values.pop_back();
          }
          env.terms.erase(h.bind);
        }
      };
      hole(0);
    }
  }

  // One candidate per observation and cost.
  std::vector<std::pair<std::string, std::size_t>> kept;
  std::vector<bool> alive(cands.size(), false);
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const std::string key = observe(recv, rs.env, cands[i].message, spec_.cfg);
    bool dominated = false;
    for (auto& [k, j] : kept) {
      if (k == key && alive[j] && covers(cands[j].guesses, cands[i].guesses)) dominated = true;
    }
    if (dominated) continue;
    for (auto& [k, j] : kept) {
      if (k == key && alive[j] && cands[j].injected && covers(cands[i].guesses, cands[j].guesses)) alive[j] = false;
    }
    alive[i] = true;
    kept.emplace_back(key, i);
  }

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (alive[i]) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return cands[a].guesses.size() < cands[b].guesses.size(); });

  auto sender = senders.find(recv.channel);
  for (std::size_t i : order) {
    const Candidate& c = cands[i];
    ExecutionState next = s;
    next.ledger.merge(c.guesses);
    StepOutcome so;
    try {
      so = step_role(role, rs, RoleInput{c.message, {}}, next.names, spec_.cfg);
    } catch (const PatternMismatch&) {
      continue;
    }
    TraceStep step;
    step.kind = StepKind::Deliver;
    step.actor = c.injected ? "Intruder" : (sender != senders.end() ? sender->second : "Intruder");
    step.recipient = role.name;
    step.channel = recv.channel;
    step.message = c.message;
    step.injected = c.injected;
    step.guesses = c.guesses;
    step.derivations = c.derivations;
    step.label = std::string(c.injected ? "inject " : "deliver ") + recv.channel + " to " + role.name + ": " +
                 c.message.str() + guesses_str(c.guesses);
    next.roles[r] = so.next;
    apply(next, so, step);
    commit(s, std::move(next), std::move(step), out);
  }
}

void Explorer::quantum_inputs(const ExecutionState& s, std::size_t r, Deducer& ded, Successors& out) const {
  const Role& role = spec_.roles[r];
  const RoleState& rs = s.roles[r];
  const auto& rm = std::get<act::RecvMeasure>(role.program[rs.pc]);
  const auto& bases = rs.env.list(rm.bases);
  const std::size_t n = bases.size();
  const bool forge = threat_.has(ThreatRule::Forge);
  const bool epr = threat_.has(ThreatRule::Epr);

  NameSupply ids = s.names;
  std::vector<Term> epr_ids;
  for (std::size_t i = 0; i < n; ++i) epr_ids.push_back(ids.fresh_epr_id("e." + role.name + "." + position_label(i + 1)));

  std::vector<Term> payload_terms = spec_.honest_payloads();
  std::vector<std::vector<Choice>> slots(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Choice>& opts = slots[i];
    if (threat_.has(ThreatRule::IdQ)) {
      for (const DeltaEntry& e : s.knowledge.delta) {
        if (e.status != QubitStatus::Available) continue;
        if (forge && !eq_b(qubit_base(e.qubit), bases[i], spec_.cfg)) continue;
        opts.push_back(Choice{e.qubit, {}, {e.id}, {}, Derivation::leaf(e.qubit, Rule::IdQ, e.id), 0, "forward " + e.id});
      }
    }
    std::vector<Choice> base_opts;
    if (forge || epr) {
      for (const Term& t : interchangeable_terms(ded, {bases[i]})) {
        for (Choice& c : deductions_of(ded, t, out.deduction_bound_hit)) pareto_add(base_opts, std::move(c));
      }
    }
    const Term a0 = attacker_bit("0");
    const Term a1 = attacker_bit("1");
    const DerivationPtr a0d = ded.classical(a0).deductions.front().derivation;
    const DerivationPtr a1d = ded.classical(a1).deductions.front().derivation;
    if (forge) {
      std::vector<std::pair<std::string, std::vector<Choice>>> payloads;
      auto group = [&](const std::string& key) -> std::vector<Choice>& {
        for (auto& [k, g] : payloads) {
          if (k == key) return g;
        }
        payloads.emplace_back(key, std::vector<Choice>{});
        return payloads.back().second;
      };
      for (const Term& t : interchangeable_terms(ded, payload_terms)) {
        for (Choice& c : deductions_of(ded, t, out.deduction_bound_hit)) {
          pareto_add(group(interchangeability_key(t, spec_.cfg).str()), std::move(c));
        }
      }
      group(a0.str()).push_back(Choice{a0, {}, {}, {}, a0d, 0, a0.str()});
      for (const Choice& b : base_opts) {
        for (const auto& [_, g] : payloads) {
          for (const Choice& p : g) {
            std::set<GuessKey> cost = b.guesses;
            cost.insert(p.guesses.begin(), p.guesses.end());
            if (!qdy::admissible(s.ledger, cost, spec_.scenario.restrictions)) continue;
            Term q = qubit(p.term, b.term);
            opts.push_back(Choice{q, cost, {}, {}, Derivation::node(q, Rule::Forge, {p.derivation, b.derivation}), 1,
                                  "forge " + q.str()});
          }
        }
      }
      if (!epr) {
        Term q = qubit(a0, a1);
        opts.push_back(Choice{q, {}, {}, {}, Derivation::node(q, Rule::Forge, {a0d, a1d}), 1, "forge " + q.str()});
      }
    }
    if (epr) {
      const std::string id = epr_ids[i].label();
      Term q = qubit_epr(a1, a0, epr_ids[i]);
      opts.push_back(Choice{q, {}, {}, {id}, Derivation::node(q, Rule::Epr, {a1d, a0d}, id), 2, "epr " + q.str()});
      if (!forge) {
        for (const Choice& b : base_opts) {
          if (!qdy::admissible(s.ledger, b.guesses, spec_.scenario.restrictions)) continue;
          Term m = qubit_epr(b.term, a0, epr_ids[i]);
          opts.push_back(
              Choice{m, b.guesses, {}, {id}, Derivation::node(m, Rule::Epr, {b.derivation, a0d}, id), 2, "epr " + m.str()});
        }
      }
    }
  }

  struct Joint {
    std::vector<const Choice*> picks;
    std::set<GuessKey> guesses;
    int rank = 0;
  };
  std::vector<Joint> joints;
  Joint cur;
  std::set<std::string> used;
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (out.truncated) return;
    if (i == n) {
      if (joints.size() >= bounds_.max_candidates) {
        out.truncated = true;
        return;
      }
      joints.push_back(cur);
      return;
    }
    for (const Choice& c : slots[i]) {
      bool clash = std::any_of(c.consumed.begin(), c.consumed.end(), [&](const std::string& id) { return used.count(id); });
      if (clash) continue;
      std::set<GuessKey> saved = cur.guesses;
      const int saved_rank = cur.rank;
      cur.guesses.insert(c.guesses.begin(), c.guesses.end());
      if (qdy::admissible(s.ledger, cur.guesses, spec_.scenario.restrictions)) {
        for (const std::string& id : c.consumed) used.insert(id);
        cur.picks.push_back(&c);
        cur.rank = std::max(cur.rank, c.rank);
        rec(i + 1);
        cur.picks.pop_back();
        for (const std::string& id : c.consumed) used.erase(id);
      }
      cur.guesses = std::move(saved);
      cur.rank = saved_rank;
    }
  };
  rec(0);
  std::stable_sort(joints.begin(), joints.end(), [](const Joint& a, const Joint& b) {
    const int ra = a.rank + (a.guesses.empty() ? 0 : 3);
    const int rb = b.rank + (b.guesses.empty() ? 0 : 3);
    return ra < rb;
  });

  for (const Joint& j : joints) {
    ExecutionState next = s;
    next.ledger.merge(j.guesses);
    RoleInput input;
    TraceStep step;
    step.kind = StepKind::DeliverQubits;
    step.actor = "Intruder";
    step.recipient = role.name;
    step.channel = "quantum";
    step.guesses = j.guesses;
    for (std::size_t i = 0; i < n; ++i) {
      const Choice& c = *j.picks[i];
      input.qubits.push_back(c.term);
      for (const std::string& id : c.consumed) next.knowledge.consume(id);
      for (const std::string& id : c.epr_ids) {
        next.names.fresh_epr_id(id.substr(1));
        step.epr_ids.insert(id);
      }
      step.consumed.insert(c.consumed.begin(), c.consumed.end());
      step.derivations.push_back(c.derivation);
      step.slots.push_back(position_label(i + 1) + ": " + c.desc);
      if (c.rank > 0) step.injected = true;
    }
    std::string label = "qubits to " + role.name + ":";
    for (const std::string& sl : step.slots) label += " {" + sl + "}";
    step.label = label + guesses_str(j.guesses);
    StepOutcome so = step_role(role, s.roles[r], input, next.names, spec_.cfg);
    next.roles[r] = so.next;
    apply(next, so, step);
    commit(s, std::move(next), std::move(step), out);
  }
}

void Explorer::measurements(const ExecutionState& s, Deducer& ded, Successors& out) const {
  if (!threat_.has(ThreatRule::Measure)) return;
  for (const DeltaEntry& e : s.knowledge.delta) {
    if (e.status != QubitStatus::Available || !e.qubit.is_app(Symbol::Qubit)) continue;
    const Term& data = e.qubit.arg(0);
    if (ded.analysed().count(data)) continue;
    std::vector<Choice> base_opts;
    for (const Term& t : interchangeable_terms(ded, {e.qubit.arg(1)})) {
      for (Choice& c : deductions_of(ded, t, out.deduction_bound_hit)) pareto_add(base_opts, std::move(c));
    }
    for (const Choice& b : base_opts) {
      if (!qdy::admissible(s.ledger, b.guesses, spec_.scenario.restrictions)) continue;
      ExecutionState next = s;
      next.ledger.merge(b.guesses);
      next.knowledge.consume(e.id);
      next.knowledge.learn(data);
      TraceStep step;
      step.kind = StepKind::Measure;
      step.actor = "Intruder";
      step.consumed = {e.id};
      step.guesses = b.guesses;
      step.message = data;
      step.derivations = {Derivation::node(data, Rule::Measure, {Derivation::leaf(e.qubit, Rule::IdQ, e.id), b.derivation})};
      step.label = "measure " + e.id + " in " + b.term.str() + guesses_str(b.guesses);
      commit(s, std::move(next), std::move(step), out);
    }
  }
}

Successors Explorer::successors(const ExecutionState& s) const {
  Successors out;
  Deducer ded(context(s));
  for (std::size_t r = 0; r < spec_.roles.size(); ++r) {
    const RoleState& rs = s.roles[r];
    const Role& role = spec_.roles[r];
    if (rs.status != RoleStatus::Running || rs.pc >= role.program.size()) continue;
    const Action& a = role.program[rs.pc];
    if (std::holds_alternative<act::Recv>(a)) {
      classical_inputs(s, r, ded, out);
    } else if (std::holds_alternative<act::RecvMeasure>(a)) {
      quantum_inputs(s, r, ded, out);
    } else if (const auto* send = std::get_if<act::Send>(&a); send && send->ordered && release_enabled(s)) {
      ExecutionState next = s;
      StepOutcome so = step_role(role, rs, {}, next.names, spec_.cfg);
      next.roles[r] = so.next;
      TraceStep step;
      step.kind = StepKind::Release;
      step.actor = role.name;
      step.channel = send->channel;
      step.label = "release " + send->channel + " by " + role.name;
      apply(next, so, step);
      next.knowledge.expire_available();
      step.effects.push_back("unused qubits expire");
      commit(s, std::move(next), std::move(step), out);
    }
  }
  measurements(s, ded, out);
  return out;
}

std::optional<Violation> Explorer::check(const ExecutionState& s, bool& bound_hit) const {
  const PropertySpec& p = spec_.property;
  std::optional<Deducer> ded;
  for (const EventRecord& e : s.events) {
    if (e.role != p.role || e.label != p.label) continue;
    if (!ded) ded.emplace(context(s));
    if (p.kind == PropertySpec::Kind::Binding) {
      if (e.args.empty() || e.args[0].empty()) continue;
      const Term& base = e.args[0][0];
      if (!eq_b(base, p.target, spec_.cfg)) continue;
      DeductionResult r = ded->classical(base);
      DerivationPtr d = r.derivable() ? r.deductions.front().derivation : Derivation::leaf(base, Rule::Member);
      return Violation{e.role + " accepted the unveiling of " + base.str() + ", revealed only after the commitment", d, false};
    }
    if (e.args.size() < 2) continue;
    const auto& values = e.args[0];
    const auto& positions = e.args[1];
    for (std::size_t i = 0; i < values.size() && i < positions.size(); ++i) {
      const std::string pos = positions[i].label();
      if (s.ledger.guessed_position(pos)) continue;
      DeductionResult r = ded->classical(values[i]);
      for (const Deduction& d : r.deductions) {
        const bool touches = std::any_of(d.guesses.begin(), d.guesses.end(), [&](const GuessKey& k) { return k.position == pos; });
        if (touches) continue;
        return Violation{"key bit " + values[i].str() + " at position " + pos + " of " + e.role + " is known to the intruder",
                         d.derivation, false};
      }
      if (r.depth_bound_exceeded) bound_hit = true;
    }
  }
  return std::nullopt;
}

std::vector<std::string> classify(const ProtocolSpec& spec, const std::vector<TraceStep>& steps) {
  std::set<std::string> injected_roles;
  bool done = false;
  bool epr = false;
  bool leak = false;
  bool measured = false;
  bool forged = false;
  bool guessed = false;
  for (const TraceStep& s : steps) {
    if (s.injected && !s.recipient.empty()) injected_roles.insert(s.recipient);
    if (s.injected && s.channel == "done") done = true;
    if (s.kind == StepKind::Measure) measured = true;
    if (s.kind == StepKind::DeliverQubits && s.injected) forged = true;
    if (!s.guesses.empty()) guessed = true;
    for (const DerivationPtr& d : s.derivations) {
      epr = epr || d->uses(Rule::Epr);
      leak = leak || d->uses(Rule::EprLeak);
      guessed = guessed || d->uses(Rule::Guess);
    }
  }
  std::vector<std::string> out;
  if (injected_roles.size() >= 2) out.push_back("MitM");
  if (done) out.push_back("Done-injection");
  if (measured && forged) out.push_back("Measure-resend");
  if (epr) out.push_back("EPR");
  if (leak) out.push_back("Epr-Leak");
  if (guessed) out.push_back("Guess");
  if (spec.property.kind == PropertySpec::Kind::Binding) out.push_back("Binding");
  return out;
}

namespace {

struct StateKey {
  std::uint64_t a;
  std::uint64_t b;
  bool operator==(const StateKey&) const = default;
};

struct StateKeyHash {
  std::size_t operator()(const StateKey& k) const { return static_cast<std::size_t>(k.a ^ (k.b * 0x9e3779b97f4a7c15ULL)); }
};

StateKey key_of(const ExecutionState& s) {
  const std::string c = s.canonical();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : c) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return StateKey{h, static_cast<std::uint64_t>(std::hash<std::string>{}(c))};
}

struct Expansion {
  Successors succ;
  std::vector<std::optional<Violation>> violations;
  std::vector<bool> bound_hits;
};

Expansion expand(const Explorer& ex, const ExecutionState& s) {
  Expansion e;
  e.succ = ex.successors(s);
  for (const ExecutionState& c : e.succ.states) {
    bool hit = false;
    e.violations.push_back(ex.check(c, hit));
    e.bound_hits.push_back(hit);
  }
  return e;
}

AttackTrace make_attack(const Explorer& ex, const ExecutionState& s, const Violation& v) {
  AttackTrace t;
  t.steps = s.trace();
  TraceStep last;
  last.index = t.steps.size();
  last.kind = StepKind::Violation;
  last.actor = "Intruder";
  last.derivations = {v.derivation};
  last.label = "violation: " + v.description;
  t.steps.push_back(std::move(last));
  t.classification = classify(ex.spec(), t.steps);
  t.violation = v.description;
  t.ledger = s.ledger;
  return t;
}

}  // namespace

Verdict explore(const ProtocolSpec& spec, const ThreatRuleSet& threat, const ExplorationBounds& bounds) {
  const auto start = std::chrono::steady_clock::now();
  Explorer ex(spec, threat, bounds);
  Verdict v;
  v.max_depth = bounds.max_depth;
  auto finish = [&](Verdict& out) -> Verdict& {
    out.stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!out.attack) out.kind = out.inconclusive_reasons.empty() ? VerdictKind::Exhausted : VerdictKind::Inconclusive;
    return out;
  };
  auto note = [&](const Successors& succ) {
    if (succ.truncated) v.inconclusive_reasons.insert("intruder input enumeration cap reached");
    if (succ.deduction_bound_hit) v.inconclusive_reasons.insert("deduction depth bound reached");
  };

  std::unordered_set<StateKey, StateKeyHash> visited;
  ExecutionState init = ex.initial();
  visited.insert(key_of(init));
  v.stats.states = 1;
  bool hit = false;
  if (auto viol = ex.check(init, hit)) {
    v.kind = VerdictKind::Attack;
    v.attack = make_attack(ex, init, *viol);
    return finish(v);
  }
  if (hit) v.inconclusive_reasons.insert("deduction depth bound reached");

  auto admit = [&](ExecutionState&& child, const std::optional<Violation>& viol, bool bound_hit,
                   std::vector<ExecutionState>& sink) -> bool {
    ++v.stats.transitions;
    if (!visited.insert(key_of(child)).second) {
      ++v.stats.dedup_hits;
      return false;
    }
    if (++v.stats.states > bounds.max_states) {
      throw ResourceExhausted("state cap of " + std::to_string(bounds.max_states) + " reached");
    }
    v.stats.depth_reached = std::max(v.stats.depth_reached, child.depth);
    if (viol) {
      v.kind = VerdictKind::Attack;
      v.attack = make_attack(ex, child, *viol);
      return true;
    }
    if (bound_hit) v.inconclusive_reasons.insert("deduction depth bound reached");
    sink.push_back(std::move(child));
    return false;
  };

  if (bounds.order == SearchOrder::DepthFirst) {
    std::vector<ExecutionState> stack{std::move(init)};
    while (!stack.empty()) {
      ExecutionState s = std::move(stack.back());
      stack.pop_back();
      if (s.depth >= bounds.max_depth) {
        if (!ex.successors(s).states.empty()) v.inconclusive_reasons.insert("execution depth bound reached");
        continue;
      }
      Expansion e = expand(ex, s);
      note(e.succ);
      if (e.succ.states.empty()) ++v.stats.terminal;
      std::vector<ExecutionState> kids;
      for (std::size_t i = 0; i < e.succ.states.size(); ++i) {
        if (admit(std::move(e.succ.states[i]), e.violations[i], e.bound_hits[i], kids)) return finish(v);
      }
      for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(std::move(*it));
    }
    return finish(v);
  }

  std::vector<ExecutionState> frontier{std::move(init)};
  for (std::size_t depth = 0; !frontier.empty(); ++depth) {
    if (depth >= bounds.max_depth) {
      for (const ExecutionState& s : frontier) {
        if (!ex.successors(s).states.empty()) {
          v.inconclusive_reasons.insert("execution depth bound reached");
          break;
        }
      }
      break;
    }
    std::vector<Expansion> expansions(frontier.size());
    const unsigned workers = std::max(1u, std::min<unsigned>(bounds.workers, static_cast<unsigned>(frontier.size())));
    if (workers == 1) {
      for (std::size_t i = 0; i < frontier.size(); ++i) expansions[i] = expand(ex, frontier[i]);
    } else {
      std::atomic<std::size_t> next{0};
      std::exception_ptr failure;
      std::mutex failure_mutex;
      std::vector<std::thread> pool;
      for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          try {
            for (std::size_t i = next++; i < frontier.size(); i = next++) expansions[i] = expand(ex, frontier[i]);
          } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        });
      }
      for (std::thread& t : pool) t.join();
      if (failure) std::rethrow_exception(failure);
    }
    std::vector<ExecutionState> next_frontier;
    for (Expansion& e : expansions) {
      note(e.succ);
      if (e.succ.states.empty()) ++v.stats.terminal;
      for (std::size_t i = 0; i < e.succ.states.size(); ++i) {
        if (admit(std::move(e.succ.states[i]), e.violations[i], e.bound_hits[i], next_frontier)) return finish(v);
      }
    }
    frontier = std::move(next_frontier);
  }
  return finish(v);
}

bool replay(const Explorer& explorer, const AttackTrace& trace) {
  ExecutionState s = explorer.initial();
  for (const TraceStep& step : trace.steps) {
    if (step.kind == StepKind::Violation) break;
    Successors succ = explorer.successors(s);
    auto it = std::find_if(succ.states.begin(), succ.states.end(),
                           [&](const ExecutionState& c) { return c.history && c.history->step.label == step.label; });
    if (it == succ.states.end()) return false;
    s = std::move(*it);
  }
  bool hit = false;
  return explorer.check(s, hit).has_value();
}

nlohmann::json verdict_to_json(const ProtocolSpec& spec, const ThreatRuleSet& threat, const Verdict& v) {
  nlohmann::json j;
  j["schema"] = "qdy.verdict/1";
  j["model"] = spec.name;
  j["protocol"] = spec.scenario.protocol;
  j["property"] = spec.property.str();
  j["threat"] = threat.str();
  if (spec.scenario.protocol == "qkd") j["channels"] = spec.channels.str();
  j["verdict"] = std::string(verdict_name(v.kind));
  j["exitCode"] = v.exit_code();
  j["stats"] = {{"states", v.stats.states},         {"transitions", v.stats.transitions},
                {"dedupHits", v.stats.dedup_hits},  {"depthReached", v.stats.depth_reached},
                {"terminal", v.stats.terminal},     {"maxDepth", v.max_depth},
                {"seconds", v.stats.seconds}};
  j["inconclusiveReasons"] = std::vector<std::string>(v.inconclusive_reasons.begin(), v.inconclusive_reasons.end());
  if (v.attack) {
    nlohmann::json a;
    a["classification"] = v.attack->classification;
    a["violation"] = v.attack->violation;
    a["ledger"] = nlohmann::json::array();
    for (const GuessKey& k : v.attack->ledger.keys()) a["ledger"].push_back(k.str());
    a["steps"] = nlohmann::json::array();
    for (const TraceStep& s : v.attack->steps) a["steps"].push_back(s.to_json());
    j["attack"] = a;
  }
  return j;
}

std::string verdict_to_text(const ProtocolSpec& spec, const ThreatRuleSet& threat, const Verdict& v) {
  std::ostringstream o;
  o << spec.name << "  " << spec.property.str() << "  threat " << threat.str();
  if (spec.scenario.protocol == "qkd") o << "  " << spec.channels.str();
  o << "\n";
  o << "verdict: " << verdict_name(v.kind) << "\n";
  o << "states " << v.stats.states << ", transitions " << v.stats.transitions << ", dedup hits " << v.stats.dedup_hits
    << ", depth " << v.stats.depth_reached << "/" << v.max_depth << ", " << v.stats.seconds << " s\n";
  for (const std::string& r : v.inconclusive_reasons) o << "inconclusive: " << r << "\n";
  if (v.attack) {
    o << "attack:";
    for (const std::string& c : v.attack->classification) o << " " << c;
    o << "\n";
    for (const TraceStep& s : v.attack->steps) {
      o << "  " << s.index << ". ";
      if (s.kind == StepKind::Violation) {
        o << "VIOLATION " << v.attack->violation << "\n";
        for (const DerivationPtr& d : s.derivations) o << "     derivation " << d->to_json().dump() << "\n";
        continue;
      }
      o << s.label << "\n";
      for (const std::string& e : s.effects) o << "       > " << e << "\n";
    }
  }
  return o.str();
}

namespace {

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

void dot_derivation(std::ostringstream& o, const Derivation& d, const std::string& id, std::size_t& counter) {
  o << "  " << id << " [shape=ellipse,label=\"" << rule_name(d.rule) << "\\n" << dot_escape(d.conclusion.str()) << "\"];\n";
  for (const DerivationPtr& p : d.premises) {
    const std::string child = "d" + std::to_string(counter++);
    dot_derivation(o, *p, child, counter);
    o << "  " << child << " -> " << id << ";\n";
  }
}

}  // namespace

std::string trace_to_dot(const ProtocolSpec& spec, const AttackTrace& trace) {
  std::ostringstream o;
  o << "digraph attack {\n  rankdir=TB;\n  label=\"" << dot_escape(spec.name + ": " + trace.violation) << "\";\n";
  o << "  node [shape=box,fontname=\"monospace\"];\n";
  std::size_t counter = 0;
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    const TraceStep& s = trace.steps[i];
    std::string label = std::to_string(s.index) + " " + std::string(step_kind_name(s.kind)) + " (" + s.actor;
    if (!s.recipient.empty()) label += " -> " + s.recipient;
    label += ")\\n" + dot_escape(s.kind == StepKind::Violation ? trace.violation : s.label);
    o << "  s" << i << " [label=\"" << label << "\"" << (s.kind == StepKind::Violation ? ",color=red" : "")
      << (s.injected ? ",style=bold" : "") << "];\n";
    if (i > 0) o << "  s" << i - 1 << " -> s" << i << ";\n";
    if (s.kind == StepKind::Violation) {
      for (const DerivationPtr& d : s.derivations) {
        const std::string id = "d" + std::to_string(counter++);
        dot_derivation(o, *d, id, counter);
        o << "  " << id << " -> s" << i << " [style=dashed];\n";
      }
    }
  }
  o << "}\n";
  return o.str();
}

}  // namespace qdy
