#include "qdy/protocol.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace qdy {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

Term v(const std::string& name) { return Term::var(name); }

std::vector<Term> positions_list(int n) {
  std::vector<Term> out;
  for (int i = 1; i <= n; ++i) out.push_back(Term::constant(position_label(static_cast<std::size_t>(i))));
  return out;
}

std::vector<Term> decode_positions(const Term& t, std::size_t n) {
  std::vector<Term> out;
  if (t.is_const() && t.label() == "nil") return out;
  Term cur = t;
  while (true) {
    Term head = cur.is_app(Symbol::Pair) ? cur.arg(0) : cur;
    auto idx = position_index(head);
    if (!idx || *idx < 1 || *idx > n) throw PatternMismatch("not a position: " + head.str());
    if (!out.empty() && *position_index(out.back()) >= *idx) throw PatternMismatch("positions must be increasing");
    out.push_back(head);
    if (!cur.is_app(Symbol::Pair)) break;
    Term next = cur.arg(1);
    cur = next;
  }
  return out;
}

bool member_b(const Term& t, const std::vector<Term>& set, const InterchangeabilityConfig& cfg) {
  return std::any_of(set.begin(), set.end(), [&](const Term& s) { return eq_b(t, s, cfg); });
}

}  // namespace

std::string_view channel_mode_name(ChannelMode m) {
  switch (m) {
    case ChannelMode::Open:
      return "open";
    case ChannelMode::Authentic:
      return "authentic";
    case ChannelMode::ConfidentialWritable:
      return "confidential-writable";
    case ChannelMode::ConfidentialAuthentic:
      return "confidential-authentic";
  }
  return "?";
}

bool intruder_reads(ChannelMode m) { return m == ChannelMode::Open || m == ChannelMode::Authentic; }
bool intruder_writes(ChannelMode m) { return m == ChannelMode::Open || m == ChannelMode::ConfidentialWritable; }

ChannelAssumptions ChannelAssumptions::from_auth_list(std::string_view csv, bool order) {
  ChannelAssumptions out;
  out.order = order;
  std::string all(csv);
  std::stringstream ss(all);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string key = lower(trim(item));
    if (key.empty() || key == "none") continue;
    if (key == "done") {
      out.auth_done = true;
    } else if (key == "bases") {
      out.auth_bases = true;
    } else if (key == "matchingbases") {
      out.auth_matching_bases = true;
    } else if (key == "verif") {
      out.auth_verif = true;
    } else {
      throw ValidationError("unknown channel '" + trim(item) + "' (expected done, bases, matchingBases, verif)");
    }
  }
  return out;
}

std::string ChannelAssumptions::auth_list() const {
  std::vector<std::string> items;
  if (auth_done) items.push_back("done");
  if (auth_bases) items.push_back("bases");
  if (auth_matching_bases) items.push_back("matchingBases");
  if (auth_verif) items.push_back("verif");
  std::string out;
  for (const std::string& s : items) out += (out.empty() ? "" : ",") + s;
  return out;
}

std::string ChannelAssumptions::str() const {
  std::string out = "Auth(" + auth_list() + ")";
  if (order) out += "+Order";
  return out;
}

const Term& Env::term(const std::string& name) const {
  auto it = terms.find(name);
  if (it == terms.end()) throw PatternMismatch("unbound variable ?" + name);
  return it->second;
}

const std::vector<Term>& Env::list(const std::string& name) const {
  auto it = lists.find(name);
  if (it == lists.end()) throw PatternMismatch("unbound list ?" + name);
  return it->second;
}

Term substitute(const Term& pattern, const Env& env) {
  if (pattern.is_var()) {
    if (auto it = env.terms.find(pattern.label()); it != env.terms.end()) return it->second;
    if (auto it = env.lists.find(pattern.label()); it != env.lists.end()) return tuple(it->second);
    throw PatternMismatch("unbound variable ?" + pattern.label());
  }
  if (!pattern.is_app() || pattern.is_ground()) return pattern;
  std::vector<Term> args;
  for (const Term& a : pattern.args()) args.push_back(substitute(a, env));
  return Term::app(pattern.symbol(), std::move(args));
}

std::string position_label(std::size_t i) { return std::to_string(i); }

std::optional<std::size_t> position_index(const Term& t) {
  if (!t.is_const() || t.label().empty() || t.label().size() > 6) return std::nullopt;
  if (!std::all_of(t.label().begin(), t.label().end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
    return std::nullopt;
  }
  return static_cast<std::size_t>(std::stoul(t.label()));
}

std::string describe(const Action& a) {
  return std::visit(
      overloaded{
          [](const act::SendQuantum& x) { return "send-quantum qubit(?" + x.payload + "[i], ?" + x.bases + "[i])"; },
          [](const act::RecvMeasure& x) { return "receive-measure in ?" + x.bases + " -> ?" + x.bind; },
          [](const act::Send& x) { return "send " + x.channel + " " + x.message.str() + (x.ordered ? " (ordered)" : ""); },
          [](const act::Recv& x) {
            std::string s = "receive " + x.channel;
            if (x.constant) s += " " + x.constant->str();
            for (const Hole& h : x.holes) s += " ?" + h.bind;
            if (x.each) s += " ?" + x.each->bind + "[?" + x.each->over + "]";
            return s;
          },
          [](const act::MatchPositions& x) {
            return "match ?" + x.lhs + " ~ ?" + x.rhs + " -> ?" + x.bind + " (>= " + std::to_string(x.threshold) + ")";
          },
          [](const act::SplitLast& x) { return "split ?" + x.set + " -> ?" + x.last + ", ?" + x.rest; },
          [](const act::RequireMember& x) { return "require ?" + x.element + " in ?" + x.set; },
          [](const act::RequireSize& x) { return "require |?" + x.set + "| >= " + std::to_string(x.min); },
          [](const act::Remove& x) { return "?" + x.bind + " := ?" + x.set + " \\ ?" + x.element; },
          [](const act::Select& x) { return "?" + x.bind + " := ?" + x.list + "[?" + x.index + "]"; },
          [](const act::SelectEach& x) { return "?" + x.bind + " := ?" + x.list + "[?" + x.indices + "]"; },
          [](const act::CompareB& x) { return "compare " + x.lhs.str() + " ~b " + x.rhs.str(); },
          [](const act::Event& x) {
            std::string s = "event " + x.label + "(";
            for (std::size_t i = 0; i < x.args.size(); ++i) s += (i ? ",?" : "?") + x.args[i];
            return s + ")";
          },
          [](const act::Finish&) { return std::string("finish"); },
      },
      a);
}

std::string_view role_status_name(RoleStatus s) {
  switch (s) {
    case RoleStatus::Running:
      return "running";
    case RoleStatus::Aborted:
      return "aborted";
    case RoleStatus::Finished:
      return "finished";
  }
  return "?";
}

bool waits_for_input(const Action& a) {
  return std::holds_alternative<act::Recv>(a) || std::holds_alternative<act::RecvMeasure>(a);
}

Term assemble_message(const act::Recv& recv, const std::vector<Term>& static_values,
                      const std::optional<std::vector<Term>>& each_values) {
  if (recv.constant) return *recv.constant;
  std::vector<Term> parts = static_values;
  if (recv.each) parts.push_back(tuple(each_values ? *each_values : std::vector<Term>{}));
  return tuple(parts);
}

StepOutcome step_role(const Role& role, const RoleState& state, const RoleInput& input, NameSupply& names,
                      const InterchangeabilityConfig& cfg) {
  if (state.status != RoleStatus::Running) throw PatternMismatch(role.name + " is not running");
  if (state.pc >= role.program.size()) throw PatternMismatch(role.name + " ran past its program");
  StepOutcome out;
  out.next = state;
  Env& env = out.next.env;
  auto abort = [&](std::string why) {
    out.next.status = RoleStatus::Aborted;
    out.note = "abort: " + std::move(why);
  };
  bool advance = true;

  std::visit(
      overloaded{
          [&](const act::SendQuantum& x) {
            const auto& data = env.list(x.payload);
            const auto& bases = env.list(x.bases);
            for (std::size_t i = 0; i < data.size(); ++i) {
              out.outputs.push_back(Output{"quantum", qubit(data[i], bases[i]), true,
                                           role.name + ".q" + position_label(i + 1)});
            }
          },
          [&](const act::RecvMeasure& x) {
            const auto& bases = env.list(x.bases);
            if (input.qubits.size() != bases.size()) throw PatternMismatch("expected one qubit per base");
            std::vector<Term> outcomes;
            for (std::size_t i = 0; i < bases.size(); ++i) {
              HonestMeasurement m =
                  measure_honest(input.qubits[i], bases[i], cfg, names, "n." + role.name + "." + position_label(i + 1));
              outcomes.push_back(m.outcome);
              if (m.epr_event) out.epr_events.push_back(*m.epr_event);
            }
            env.lists[x.bind] = std::move(outcomes);
          },
          [&](const act::Send& x) { out.outputs.push_back(Output{x.channel, substitute(x.message, env), false, {}}); },
          [&](const act::Recv& x) {
            if (!input.message) throw PatternMismatch("receive without a message");
            const Term& msg = *input.message;
            if (x.constant) {
              if (!(msg == *x.constant)) throw PatternMismatch("expected " + x.constant->str());
              return;
            }
            const std::size_t comps = x.holes.size() + (x.each ? 1 : 0);
            auto parts = untuple(msg, comps);
            if (!parts) throw PatternMismatch("message does not have " + std::to_string(comps) + " components");
            const std::size_t n = env.lists.count("P") ? env.list("P").size() : 0;
            for (std::size_t i = 0; i < x.holes.size(); ++i) {
              const Hole& h = x.holes[i];
              if (h.kind == HoleKind::Subset) {
                env.lists[h.bind] = decode_positions((*parts)[i], n);
              } else {
                env.terms[h.bind] = (*parts)[i];
              }
            }
            if (x.each) {
              const std::size_t m = env.list(x.each->over).size();
              auto values = untuple(parts->back(), m);
              if (!values) throw PatternMismatch("expected " + std::to_string(m) + " values");
              env.lists[x.each->bind] = std::move(*values);
            }
          },
          [&](const act::MatchPositions& x) {
            CompareSiteScope audit;
            const auto& rhs = env.list(x.rhs);
            std::vector<Term> matched;
            for (std::size_t i = 0; i < rhs.size(); ++i) {
              const Term& l = env.lists.count(x.lhs) ? env.list(x.lhs).at(i) : env.term(x.lhs);
              if (eq_b(l, rhs[i], cfg)) matched.push_back(Term::constant(position_label(i + 1)));
            }
            env.lists[x.bind] = matched;
            if (matched.size() < x.threshold) {
              abort("only " + std::to_string(matched.size()) + " matching positions");
              advance = false;
            }
          },
          [&](const act::SplitLast& x) {
            std::vector<Term> set = env.list(x.set);
            if (set.empty()) {
              abort("nothing to split");
              advance = false;
              return;
            }
            env.terms[x.last] = set.back();
            set.pop_back();
            env.lists[x.rest] = std::move(set);
          },
          [&](const act::RequireMember& x) {
            CompareSiteScope audit;
            if (!member_b(env.term(x.element), env.list(x.set), cfg)) {
              abort(env.term(x.element).str() + " not in ?" + x.set);
              advance = false;
            }
          },
          [&](const act::RequireSize& x) {
            if (env.list(x.set).size() < x.min) {
              abort("?" + x.set + " too small");
              advance = false;
            }
          },
          [&](const act::Remove& x) {
            CompareSiteScope audit;
            std::vector<Term> rest;
            for (const Term& t : env.list(x.set)) {
              if (!eq_b(t, env.term(x.element), cfg)) rest.push_back(t);
            }
            env.lists[x.bind] = std::move(rest);
          },
          [&](const act::Select& x) {
            const auto& list = env.list(x.list);
            auto idx = position_index(env.term(x.index));
            if (!idx || *idx < 1 || *idx > list.size()) {
              abort("bad index " + env.term(x.index).str());
              advance = false;
              return;
            }
            env.terms[x.bind] = list[*idx - 1];
          },
          [&](const act::SelectEach& x) {
            const auto& list = env.list(x.list);
            std::vector<Term> picked;
            for (const Term& i : env.list(x.indices)) {
              auto idx = position_index(i);
              if (!idx || *idx < 1 || *idx > list.size()) {
                abort("bad index " + i.str());
                advance = false;
                return;
              }
              picked.push_back(list[*idx - 1]);
            }
            env.lists[x.bind] = std::move(picked);
          },
          [&](const act::CompareB& x) {
            CompareSiteScope audit;
            Term l = substitute(x.lhs, env);
            Term r = substitute(x.rhs, env);
            if (!eq_b(l, r, cfg)) {
              abort(l.str() + " differs from " + r.str());
              advance = false;
            }
          },
          [&](const act::Event& x) {
            EventRecord ev{role.name, x.label, {}};
            for (const std::string& a : x.args) {
              if (env.lists.count(a)) {
                ev.args.push_back(env.list(a));
              } else {
                ev.args.push_back({env.term(a)});
              }
            }
            out.events.push_back(std::move(ev));
          },
          [&](const act::Finish&) { out.next.status = RoleStatus::Finished; },
      },
      role.program[state.pc]);

  if (advance) ++out.next.pc;
  return out;
}

const std::vector<std::string>& ScenarioConfig::row(const std::string& bitstring, const std::string& role) const {
  auto b = bitstrings.find(bitstring);
  if (b == bitstrings.end()) throw ValidationError("missing bitstring '" + bitstring + "'");
  auto r = b->second.find(role);
  if (r == b->second.end()) throw ValidationError("missing bitstring '" + bitstring + "' for role " + role);
  return r->second;
}

void ScenarioConfig::validate() const {
  if (protocol != "qkd" && protocol != "qbc") throw ValidationError("unknown protocol '" + protocol + "'");
  if (n < 2 || n % 2 != 0) throw ValidationError("n must be even and >= 2, got " + std::to_string(n));
  for (const auto& [bs, rows] : bitstrings) {
    for (const auto& [role, values] : rows) {
      if (static_cast<int>(values.size()) != n) {
        throw ValidationError("bitstring " + bs + "/" + role + " has " + std::to_string(values.size()) +
                              " positions, expected n = " + std::to_string(n));
      }
      int zeros = 0;
      for (const std::string& val : values) {
        if (val != "0" && val != "1") throw ValidationError("bitstring " + bs + "/" + role + " has value '" + val + "'");
        zeros += val == "0" ? 1 : 0;
      }
      if (!allow_unbalanced && zeros * 2 != n) {
        throw ValidationError("bitstring " + bs + "/" + role + " is unbalanced (set allowUnbalanced to permit)");
      }
    }
  }
  if (protocol == "qkd") {
    row("b", "Alice");
    row("b", "Bob");
    row("d", "Alice");
  } else {
    row("b", "Bob");
  }
  for (const auto& g : same_value_groups) {
    for (const std::string& p : g) {
      auto idx = position_index(Term::constant(p));
      if (!idx || *idx < 1 || static_cast<int>(*idx) > n) throw ValidationError("same-value group position '" + p + "' out of range");
    }
  }
  try {
    restrictions.validate(n);
  } catch (const InvalidParameter& e) {
    throw ValidationError(e.what());
  }
  if (threshold) {
    const std::size_t min = protocol == "qkd" ? 2 : 1;
    if (*threshold < min || static_cast<int>(*threshold) > n) {
      throw ValidationError("threshold " + std::to_string(*threshold) + " outside [" + std::to_string(min) + "," +
                            std::to_string(n) + "]");
    }
  }
}

std::string PropertySpec::str() const {
  if (kind == Kind::Binding) return "binding(" + role + " " + label + " " + target.str() + ")";
  return "secrecy(" + role + " view)";
}

const Role& ProtocolSpec::role(const std::string& name) const { return roles.at(role_index(name)); }

std::size_t ProtocolSpec::role_index(const std::string& name) const {
  for (std::size_t i = 0; i < roles.size(); ++i) {
    if (roles[i].name == name) return i;
  }
  throw ValidationError("no role named " + name);
}

ChannelMode ProtocolSpec::mode(const std::string& channel) const {
  auto it = channel_modes.find(channel);
  return it == channel_modes.end() ? ChannelMode::Open : it->second;
}

std::vector<Term> ProtocolSpec::honest_payloads() const {
  std::vector<Term> out;
  for (const Role& r : roles) {
    for (const Action& a : r.program) {
      if (const auto* sq = std::get_if<act::SendQuantum>(&a)) {
        for (const Term& t : r.initial.list(sq->payload)) out.push_back(t);
      }
    }
  }
  return out;
}

void ProtocolSpec::validate() const {
  scenario.validate();
  for (const Role& r : roles) {
    std::set<std::string> bound;
    for (const auto& [k, _] : r.initial.terms) bound.insert(k);
    for (const auto& [k, _] : r.initial.lists) bound.insert(k);
    auto need = [&](const std::string& name, std::size_t pc) {
      if (!name.empty() && !bound.count(name)) {
        throw ValidationError(r.name + " action " + std::to_string(pc) + " uses unbound ?" + name);
      }
    };
    auto need_term = [&](const Term& t, std::size_t pc, auto&& self) -> void {
      if (t.is_var()) {
        need(t.label(), pc);
      } else if (t.is_app()) {
        for (const Term& a : t.args()) self(a, pc, self);
      }
    };
    for (std::size_t pc = 0; pc < r.program.size(); ++pc) {
      std::visit(overloaded{
                     [&](const act::SendQuantum& x) {
                       need(x.payload, pc);
                       need(x.bases, pc);
                     },
                     [&](const act::RecvMeasure& x) {
                       need(x.bases, pc);
                       bound.insert(x.bind);
                     },
                     [&](const act::Send& x) { need_term(x.message, pc, need_term); },
                     [&](const act::Recv& x) {
                       std::set<std::string> local = bound;
                       for (const Hole& h : x.holes) {
                         for (const Ref& ref : h.refs) {
                           if (!local.count(ref.var) || (!ref.index.empty() && !local.count(ref.index))) {
                             throw ValidationError(r.name + " action " + std::to_string(pc) + " refers to unbound data");
                           }
                         }
                         if (!h.set.empty() && !local.count(h.set)) throw ValidationError(r.name + " action " + std::to_string(pc) + " uses unbound ?" + h.set);
                         local.insert(h.bind);
                       }
                       if (x.each) {
                         need(x.each->over, pc);
                         need(x.each->list, pc);
                         local.insert(x.each->bind);
                       }
                       bound = std::move(local);
                     },
                     [&](const act::MatchPositions& x) {
                       need(x.lhs, pc);
                       need(x.rhs, pc);
                       bound.insert(x.bind);
                     },
                     [&](const act::SplitLast& x) {
                       need(x.set, pc);
                       bound.insert(x.last);
                       bound.insert(x.rest);
                     },
                     [&](const act::RequireMember& x) {
                       need(x.element, pc);
                       need(x.set, pc);
                     },
                     [&](const act::RequireSize& x) { need(x.set, pc); },
                     [&](const act::Remove& x) {
                       need(x.set, pc);
                       need(x.element, pc);
                       bound.insert(x.bind);
                     },
                     [&](const act::Select& x) {
                       need(x.list, pc);
                       need(x.index, pc);
                       bound.insert(x.bind);
                     },
                     [&](const act::SelectEach& x) {
                       need(x.list, pc);
                       need(x.indices, pc);
                       bound.insert(x.bind);
                     },
                     [&](const act::CompareB& x) {
                       need_term(x.lhs, pc, need_term);
                       need_term(x.rhs, pc, need_term);
                     },
                     [&](const act::Event& x) {
                       for (const std::string& a : x.args) need(a, pc);
                     },
                     [&](const act::Finish&) {},
                 },
                 r.program[pc]);
    }
  }
}

namespace {

std::vector<Term> bit_row(const Term& seed, const ScenarioConfig& sc, const std::string& bs, const std::string& role) {
  const auto& values = sc.row(bs, role);
  std::vector<Term> out;
  for (std::size_t i = 0; i < values.size(); ++i) out.push_back(bit(seed, bs, position_label(i + 1), role, values[i]));
  return out;
}

Universe universe_of(const ScenarioConfig& sc) {
  Universe u;
  for (const auto& [bs, rows] : sc.bitstrings) u.bitstrings.push_back(bs);
  u.roles = {"Alice", "Bob"};
  for (const auto& [bs, rows] : sc.bitstrings) {
    for (const auto& [role, _] : rows) {
      if (std::find(u.roles.begin(), u.roles.end(), role) == u.roles.end()) u.roles.push_back(role);
    }
  }
  for (int i = 1; i <= sc.n; ++i) u.positions.push_back(position_label(static_cast<std::size_t>(i)));
  return u;
}

Hole compare_hole(std::string bind, std::vector<Ref> refs, bool observable = false) {
  Hole h;
  h.kind = HoleKind::Compare;
  h.bind = std::move(bind);
  h.refs = std::move(refs);
  h.observable = observable;
  return h;
}

}  // namespace

ProtocolSpec make_qkd_spec(const ScenarioConfig& scenario, const ChannelAssumptions& channels, const std::string& view) {
  scenario.validate();
  if (view != "Alice" && view != "Bob") throw ValidationError("secrecy view must be Alice or Bob, got '" + view + "'");
  ProtocolSpec spec;
  spec.name = "qkd-" + std::to_string(scenario.n) + "q";
  spec.scenario = scenario;
  spec.seed = Term::name("k");
  spec.cfg.cross_position_bitstrings = scenario.cross_position;
  spec.channels = channels;
  spec.universe = universe_of(scenario);
  spec.default_threat = "full";

  const auto& ba = scenario.row("b", "Alice");
  const auto& bb = scenario.row("b", "Bob");
  std::size_t matching = 0;
  for (int i = 0; i < scenario.n; ++i) matching += ba[static_cast<std::size_t>(i)] == bb[static_cast<std::size_t>(i)] ? 1 : 0;
  spec.threshold = scenario.threshold.value_or(matching);
  if (spec.threshold < 2) throw ValidationError("QKD needs at least two matching positions (one verification, one key)");

  const std::vector<Term> P = positions_list(scenario.n);

  Role alice;
  alice.name = "Alice";
  alice.initial.lists["b"] = bit_row(spec.seed, scenario, "b", "Alice");
  alice.initial.lists["d"] = bit_row(spec.seed, scenario, "d", "Alice");
  alice.initial.lists["P"] = P;
  Hole subset;
  subset.kind = HoleKind::Subset;
  subset.bind = "J";
  subset.set = "P";
  subset.min_size = spec.threshold;
  alice.program = {
      act::SendQuantum{"d", "b"},
      act::Recv{"done", Term::constant("done"), {}, std::nullopt},
      act::Send{"bases", v("b"), channels.order},
      act::Recv{"matchingBases", std::nullopt, {subset}, std::nullopt},
      act::RequireSize{"J", spec.threshold},
      act::SplitLast{"J", "v", "K"},
      act::Select{"d", "v", "dv"},
      act::Send{"verif", pair(v("v"), v("dv")), false},
      act::SelectEach{"d", "K", "dK"},
      act::Send{"keycheck", v("dK"), false},
      act::Event{"secret", {"dK", "K"}},
      act::Finish{},
  };

  Role bob;
  bob.name = "Bob";
  bob.initial.lists["bp"] = bit_row(spec.seed, scenario, "b", "Bob");
  bob.initial.lists["P"] = P;
  Hole member;
  member.kind = HoleKind::Member;
  member.bind = "p";
  member.set = "J";
  bob.program = {
      act::RecvMeasure{"bp", "o"},
      act::Send{"done", Term::constant("done"), false},
      act::Recv{"bases", std::nullopt, {}, EachHole{"P", "bp", "x"}},
      act::MatchPositions{"x", "bp", "J", spec.threshold},
      act::Send{"matchingBases", v("J"), false},
      act::Recv{"verif", std::nullopt, {member, compare_hole("y", {Ref{"o", "p", false}})}, std::nullopt},
      act::RequireMember{"p", "J"},
      act::Remove{"J", "p", "K"},
      act::Select{"o", "p", "op"},
      act::CompareB{v("y"), v("op")},
      act::Recv{"keycheck", std::nullopt, {}, EachHole{"K", "o", "yK"}},
      act::SelectEach{"o", "K", "oK"},
      act::CompareB{v("yK"), v("oK")},
      act::Event{"secret", {"oK", "K"}},
      act::Finish{},
  };
  spec.roles = {alice, bob};

  auto mode = [](bool auth) { return auth ? ChannelMode::Authentic : ChannelMode::Open; };
  spec.channel_modes = {
      {"done", mode(channels.auth_done)},
      {"bases", mode(channels.auth_bases)},
      {"matchingBases", mode(channels.auth_matching_bases)},
      {"verif", mode(channels.auth_verif)},
      {"keycheck", channels.auth_verif ? ChannelMode::ConfidentialAuthentic : ChannelMode::ConfidentialWritable},
  };
  spec.property.kind = PropertySpec::Kind::Secrecy;
  spec.property.role = view;
  spec.property.label = "secret";
  spec.validate();
  return spec;
}

ProtocolSpec make_qbc_spec(const ScenarioConfig& scenario) {
  scenario.validate();
  ProtocolSpec spec;
  spec.name = "qbc-" + std::to_string(scenario.n) + "q";
  spec.scenario = scenario;
  spec.seed = Term::name("k");
  spec.cfg.cross_position_bitstrings = scenario.cross_position.empty() ? std::set<std::string>{"b"} : scenario.cross_position;
  spec.scenario.cross_position = spec.cfg.cross_position_bitstrings;
  spec.universe = universe_of(scenario);
  spec.forbidden_rules = {ThreatRule::Complem};
  spec.default_threat = "full";

  const auto& bb = scenario.row("b", "Bob");
  spec.threshold = scenario.threshold.value_or(static_cast<std::size_t>(std::count(bb.begin(), bb.end(), "0")));
  if (spec.threshold < 1) throw ValidationError("QBC needs a positive threshold");

  const Term plus = bit(spec.seed, "b", "1", "Alice", "0");
  const Term times = bit(spec.seed, "b", "2", "Alice", "1");
  spec.initial_knowledge = {times};

  Role bob;
  bob.name = "Bob";
  bob.initial.lists["bp"] = bit_row(spec.seed, scenario, "b", "Bob");
  bob.initial.lists["P"] = positions_list(scenario.n);
  bob.initial.terms["plus"] = plus;
  bob.program = {
      act::RecvMeasure{"bp", "o"},
      act::Send{"reveal", v("plus"), false},
      act::Recv{"unveil", std::nullopt, {compare_hole("base", {Ref{"bp", "", true}}, true)}, EachHole{"P", "o", "ys"}},
      act::MatchPositions{"base", "bp", "J", spec.threshold},
      act::SelectEach{"ys", "J", "yJ"},
      act::SelectEach{"o", "J", "oJ"},
      act::CompareB{v("yJ"), v("oJ")},
      act::Event{"accept", {"base"}},
      act::Finish{},
  };
  spec.roles = {bob};
  spec.channel_modes = {{"reveal", ChannelMode::Open}, {"unveil", ChannelMode::Open}};
  spec.property.kind = PropertySpec::Kind::Binding;
  spec.property.role = "Bob";
  spec.property.label = "accept";
  spec.property.target = plus;
  spec.validate();
  return spec;
}

namespace {

using nlohmann::json;

const json& require(const json& j, const std::string& key, const std::string& at) {
  if (!j.is_object() || !j.contains(key)) throw SchemaError(at, "missing key '" + key + "'");
  return j.at(key);
}

std::string as_string(const json& j, const std::string& at) {
  if (!j.is_string()) throw SchemaError(at, "expected a string");
  return j.get<std::string>();
}

std::size_t as_count(const json& j, const std::string& at) {
  if (!j.is_number_integer() || j.get<long long>() < 0) throw SchemaError(at, "expected a non-negative integer");
  return j.get<std::size_t>();
}

std::set<std::string> string_set(const json& j, const std::string& at) {
  if (!j.is_array()) throw SchemaError(at, "expected an array");
  std::set<std::string> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string loc = at + "/" + std::to_string(i);
    if (j[i].is_number_integer()) {
      out.insert(std::to_string(j[i].get<long long>()));
    } else {
      out.insert(as_string(j[i], loc));
    }
  }
  return out;
}

RestrictionSet default_restrictions(const ScenarioConfig& sc) {
  RestrictionSet rs;
  Budgets b = default_budgets(sc.n);
  rs.default_cap = b.half;
  std::size_t gi = 0;
  for (const auto& g : sc.same_value_groups) {
    rs.groups.push_back(RestrictionGroup{"same-value-" + std::to_string(++gi), g, {}, {}, b.quarter});
  }
  if (sc.protocol == "qbc") {
    rs.per_bitstring_role[{"b", "Alice"}] = 0;
    rs.per_bitstring_role[{"b", "Bob"}] = 0;
  }
  return rs;
}

}  // namespace

RestrictionSet scenario_default_restrictions(const ScenarioConfig& sc) { return default_restrictions(sc); }

ScenarioDocument parse_scenario(std::string_view document) {
  json j;
  try {
    j = json::parse(document);
  } catch (const json::parse_error& e) {
    throw SchemaError("/", std::string("malformed JSON: ") + e.what());
  }
  return parse_scenario_json(j);
}

ScenarioDocument parse_scenario_json(const json& j) {
  if (!j.is_object()) throw SchemaError("/", "expected an object");
  static const std::set<std::string> known = {"name", "protocol", "n", "bitstrings", "sameValueGroups", "restrictions",
                                              "channels", "threatModel", "property", "threshold", "allowUnbalanced",
                                              "crossPositionBitstrings"};
  for (const auto& [k, _] : j.items()) {
    if (!known.count(k)) throw SchemaError("/" + k, "unknown key");
  }
  ScenarioConfig sc;
  sc.protocol = lower(as_string(require(j, "protocol", "/"), "/protocol"));
  const json& n = require(j, "n", "/");
  if (!n.is_number_integer()) throw SchemaError("/n", "expected an integer");
  sc.n = n.get<int>();

  const json& bs = require(j, "bitstrings", "/");
  if (!bs.is_object()) throw SchemaError("/bitstrings", "expected an object");
  for (const auto& [name, rows] : bs.items()) {
    const std::string at = "/bitstrings/" + name;
    if (!rows.is_object()) throw SchemaError(at, "expected an object of roles");
    for (const auto& [role, values] : rows.items()) {
      if (!values.is_array()) throw SchemaError(at + "/" + role, "expected an array");
      std::vector<std::string> row;
      for (std::size_t i = 0; i < values.size(); ++i) row.push_back(as_string(values[i], at + "/" + role + "/" + std::to_string(i)));
      sc.bitstrings[name][role] = std::move(row);
    }
  }
  if (j.contains("sameValueGroups")) {
    const json& g = j.at("sameValueGroups");
    if (!g.is_array()) throw SchemaError("/sameValueGroups", "expected an array");
    for (std::size_t i = 0; i < g.size(); ++i) sc.same_value_groups.push_back(string_set(g[i], "/sameValueGroups/" + std::to_string(i)));
  }
  if (j.contains("threshold")) sc.threshold = as_count(j.at("threshold"), "/threshold");
  if (j.contains("allowUnbalanced")) {
    if (!j.at("allowUnbalanced").is_boolean()) throw SchemaError("/allowUnbalanced", "expected a boolean");
    sc.allow_unbalanced = j.at("allowUnbalanced").get<bool>();
  }
  if (j.contains("crossPositionBitstrings")) sc.cross_position = string_set(j.at("crossPositionBitstrings"), "/crossPositionBitstrings");

  if (sc.n >= 2 && sc.n % 2 == 0) sc.restrictions = default_restrictions(sc);
  if (j.contains("restrictions")) {
    const json& r = j.at("restrictions");
    if (!r.is_object()) throw SchemaError("/restrictions", "expected an object");
    if (r.contains("default")) sc.restrictions.default_cap = as_count(r.at("default"), "/restrictions/default");
    if (r.contains("perBitstringRole")) {
      const json& p = r.at("perBitstringRole");
      if (!p.is_array()) throw SchemaError("/restrictions/perBitstringRole", "expected an array");
      for (std::size_t i = 0; i < p.size(); ++i) {
        const std::string at = "/restrictions/perBitstringRole/" + std::to_string(i);
        sc.restrictions.per_bitstring_role[{as_string(require(p[i], "bitstring", at), at + "/bitstring"),
                                            as_string(require(p[i], "role", at), at + "/role")}] =
            as_count(require(p[i], "max", at), at + "/max");
      }
    }
    if (r.contains("groups")) {
      const json& g = r.at("groups");
      if (!g.is_array()) throw SchemaError("/restrictions/groups", "expected an array");
      sc.restrictions.groups.clear();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const std::string at = "/restrictions/groups/" + std::to_string(i);
        RestrictionGroup grp;
        grp.label = g[i].contains("label") ? as_string(g[i].at("label"), at + "/label") : "group-" + std::to_string(i + 1);
        grp.positions = string_set(require(g[i], "positions", at), at + "/positions");
        if (g[i].contains("bitstrings")) grp.bitstrings = string_set(g[i].at("bitstrings"), at + "/bitstrings");
        if (g[i].contains("roles")) grp.roles = string_set(g[i].at("roles"), at + "/roles");
        grp.cap = as_count(require(g[i], "max", at), at + "/max");
        sc.restrictions.groups.push_back(std::move(grp));
      }
    }
  }

  ChannelAssumptions channels;
  if (j.contains("channels")) {
    const json& c = j.at("channels");
    if (!c.is_object()) throw SchemaError("/channels", "expected an object");
    if (c.contains("auth")) {
      std::string csv;
      for (const std::string& s : string_set(c.at("auth"), "/channels/auth")) csv += s + ",";
      channels = ChannelAssumptions::from_auth_list(csv);
    }
    if (c.contains("order")) {
      if (!c.at("order").is_boolean()) throw SchemaError("/channels/order", "expected a boolean");
      channels.order = c.at("order").get<bool>();
    }
  }

  std::string view = "Bob";
  if (j.contains("property")) {
    const json& p = j.at("property");
    const std::string kind = lower(as_string(require(p, "kind", "/property"), "/property/kind"));
    if (kind == "secrecy") {
      if (sc.protocol != "qkd") throw ValidationError("secrecy is only defined for the qkd protocol");
      if (p.contains("view")) {
        view = as_string(p.at("view"), "/property/view");
        if (!view.empty()) view[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(view[0])));
      }
    } else if (kind == "binding") {
      if (sc.protocol != "qbc") throw ValidationError("binding is only defined for the qbc protocol");
    } else {
      throw SchemaError("/property/kind", "expected secrecy or binding");
    }
  }

  ScenarioDocument doc;
  doc.spec = sc.protocol == "qkd" ? make_qkd_spec(sc, channels, view) : make_qbc_spec(sc);
  if (j.contains("name")) doc.spec.name = as_string(j.at("name"), "/name");
  if (j.contains("threatModel")) doc.threat_model = as_string(j.at("threatModel"), "/threatModel");
  return doc;
}

nlohmann::json scenario_to_json(const ProtocolSpec& spec) {
  json j;
  const ScenarioConfig& sc = spec.scenario;
  j["name"] = spec.name;
  j["protocol"] = sc.protocol;
  j["n"] = sc.n;
  j["bitstrings"] = json::object();
  for (const auto& [bs, rows] : sc.bitstrings) {
    for (const auto& [role, values] : rows) j["bitstrings"][bs][role] = values;
  }
  j["sameValueGroups"] = json::array();
  for (const auto& g : sc.same_value_groups) j["sameValueGroups"].push_back(std::vector<std::string>(g.begin(), g.end()));
  json r;
  if (sc.restrictions.default_cap) r["default"] = *sc.restrictions.default_cap;
  r["perBitstringRole"] = json::array();
  for (const auto& [key, cap] : sc.restrictions.per_bitstring_role) {
    r["perBitstringRole"].push_back({{"bitstring", key.first}, {"role", key.second}, {"max", cap}});
  }
  r["groups"] = json::array();
  for (const RestrictionGroup& g : sc.restrictions.groups) {
    r["groups"].push_back({{"label", g.label},
                           {"positions", std::vector<std::string>(g.positions.begin(), g.positions.end())},
                           {"bitstrings", std::vector<std::string>(g.bitstrings.begin(), g.bitstrings.end())},
                           {"roles", std::vector<std::string>(g.roles.begin(), g.roles.end())},
                           {"max", g.cap}});
  }
  j["restrictions"] = r;
  json auth = json::array();
  for (const auto& [flag, name] : {std::pair{spec.channels.auth_done, "done"}, std::pair{spec.channels.auth_bases, "bases"},
                                   std::pair{spec.channels.auth_matching_bases, "matchingBases"},
                                   std::pair{spec.channels.auth_verif, "verif"}}) {
    if (flag) auth.push_back(name);
  }
  j["channels"] = {{"auth", auth}, {"order", spec.channels.order}};
  j["threatModel"] = spec.default_threat;
  if (spec.property.kind == PropertySpec::Kind::Secrecy) {
    j["property"] = {{"kind", "secrecy"}, {"view", spec.property.role}};
  } else {
    j["property"] = {{"kind", "binding"}};
  }
  j["threshold"] = spec.threshold;
  j["allowUnbalanced"] = sc.allow_unbalanced;
  j["crossPositionBitstrings"] = std::vector<std::string>(sc.cross_position.begin(), sc.cross_position.end());
  return j;
}

}  // namespace qdy
