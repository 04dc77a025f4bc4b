#include "qdy/terms.hpp"

#include <algorithm>
#include <cctype>

namespace qdy {

namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

std::uint64_t fnv(std::string_view s, std::uint64_t h = kFnvOffset) {
  for (unsigned char c : s) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  return h;
}

thread_local int compare_site_depth = 0;
thread_local std::uint64_t compare_site_eq_e_calls = 0;

}  // namespace

struct Term::Node {
  Kind kind;
  Symbol symbol = Symbol::Pair;
  std::string label;
  std::vector<Term> args;
  std::size_t hash = 0;
  std::size_t size = 1;
  bool ground = true;
};

int arity(Symbol s) {
  switch (s) {
    case Symbol::Senc:
    case Symbol::Pair:
    case Symbol::Qubit:
      return 2;
    case Symbol::Bit:
      return 5;
    case Symbol::QubitEpr:
      return 3;
  }
  return 0;
}

std::string_view symbol_name(Symbol s) {
  switch (s) {
    case Symbol::Senc:
      return "senc";
    case Symbol::Pair:
      return "pair";
    case Symbol::Bit:
      return "bit";
    case Symbol::Qubit:
      return "qubit";
    case Symbol::QubitEpr:
      return "qubitEPR";
  }
  return "?";
}

std::optional<Symbol> symbol_from_name(std::string_view name) {
  for (Symbol s : {Symbol::Senc, Symbol::Pair, Symbol::Bit, Symbol::Qubit, Symbol::QubitEpr}) {
    if (symbol_name(s) == name) return s;
  }
  return std::nullopt;
}

Term::Term() : Term(constant("")) {}

Term::Term(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

Term Term::atom(Kind kind, std::string label) {
  auto node = std::make_shared<Node>();
  node->kind = kind;
  node->hash = mix(fnv(label), static_cast<std::uint64_t>(kind) + 7);
  node->ground = kind != Kind::Var;
  node->label = std::move(label);
  return Term(std::move(node));
}

Term Term::name(std::string label) { return atom(Kind::Name, std::move(label)); }
Term Term::constant(std::string label) { return atom(Kind::Const, std::move(label)); }
Term Term::var(std::string label) { return atom(Kind::Var, std::move(label)); }

Term Term::app(Symbol symbol, std::vector<Term> args) {
  if (static_cast<int>(args.size()) != arity(symbol)) {
    throw TermError(std::string(symbol_name(symbol)) + " expects " + std::to_string(arity(symbol)) +
                    " arguments, got " + std::to_string(args.size()));
  }
  auto node = std::make_shared<Node>();
  node->kind = Kind::App;
  node->symbol = symbol;
  std::uint64_t h = mix(static_cast<std::uint64_t>(Kind::App) + 17, static_cast<std::uint64_t>(symbol) + 101);
  for (const Term& a : args) {
    h = mix(h, a.hash());
    node->size += a.size();
    node->ground = node->ground && a.is_ground();
  }
  node->hash = h;
  node->args = std::move(args);
  return Term(std::move(node));
}

Term::Kind Term::kind() const { return node_->kind; }
const std::string& Term::label() const { return node_->label; }
Symbol Term::symbol() const { return node_->symbol; }
std::span<const Term> Term::args() const { return node_->args; }
std::size_t Term::hash() const { return node_->hash; }
std::size_t Term::size() const { return node_->size; }
bool Term::is_ground() const { return node_->ground; }

bool operator==(const Term& a, const Term& b) {
  if (a.node_ == b.node_) return true;
  if (a.node_->hash != b.node_->hash || a.node_->kind != b.node_->kind || a.node_->size != b.node_->size) {
    return false;
  }
  if (a.is_app()) {
    if (a.symbol() != b.symbol()) return false;
    for (std::size_t i = 0; i < a.args().size(); ++i) {
      if (!(a.arg(i) == b.arg(i))) return false;
    }
    return true;
  }
  return a.label() == b.label();
}

std::strong_ordering operator<=>(const Term& a, const Term& b) {
  if (a.node_ == b.node_) return std::strong_ordering::equal;
  if (auto c = a.kind() <=> b.kind(); c != 0) return c;
  if (!a.is_app()) return a.label().compare(b.label()) <=> 0;
  if (auto c = a.symbol() <=> b.symbol(); c != 0) return c;
  for (std::size_t i = 0; i < a.args().size(); ++i) {
    if (auto c = a.arg(i) <=> b.arg(i); c != 0) return c;
  }
  return std::strong_ordering::equal;
}

std::string Term::str() const {
  switch (kind()) {
    case Kind::Name:
      if (!label().empty() && label().front() == '#') return label();
      return "~" + label();
    case Kind::Const:
      return "'" + label() + "'";
    case Kind::Var:
      return "?" + label();
    case Kind::App:
      break;
  }
  if (symbol() == Symbol::Pair) return "<" + arg(0).str() + "," + arg(1).str() + ">";
  std::string out(symbol_name(symbol()));
  out += '(';
  for (std::size_t i = 0; i < args().size(); ++i) {
    if (i) out += ',';
    out += arg(i).str();
  }
  out += ')';
  return out;
}

namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Term parse() {
    Term t = term();
    skip();
    if (pos_ != text_.size()) fail("trailing input");
    return t;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw TermError("parse error at offset " + std::to_string(pos_) + ": " + what);
  }

  void skip() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!eat(c)) fail(std::string("expected '") + c + "'");
  }

  static bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-' || c == '*';
  }

  std::string ident() {
    std::size_t start = pos_;
    while (pos_ < text_.size() && ident_char(text_[pos_])) ++pos_;
    if (start == pos_) fail("expected identifier");
    return std::string(text_.substr(start, pos_ - start));
  }

  Term term() {
    skip();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    char c = text_[pos_];
    if (c == '~') {
      ++pos_;
      return Term::name(ident());
    }
    if (c == '#') {
      ++pos_;
      return Term::name("#" + ident());
    }
    if (c == '?') {
      ++pos_;
      return Term::var(ident());
    }
    if (c == '\'') {
      ++pos_;
      std::size_t end = text_.find('\'', pos_);
      if (end == std::string_view::npos) fail("unterminated constant");
      std::string label(text_.substr(pos_, end - pos_));
      pos_ = end + 1;
      return Term::constant(std::move(label));
    }
    if (c == '<') {
      ++pos_;
      std::vector<Term> items{term()};
      while (eat(',')) items.push_back(term());
      expect('>');
      if (items.size() < 2) fail("a pair needs two components");
      return tuple(items);
    }
    std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      ++pos_;
    }
    std::string head(text_.substr(start, pos_ - start));
    auto sym = symbol_from_name(head);
    if (!sym) fail("unknown function symbol '" + head + "'");
    expect('(');
    std::vector<Term> args;
    if (!eat(')')) {
      args.push_back(term());
      while (eat(',')) args.push_back(term());
      expect(')');
    }
    try {
      return Term::app(*sym, std::move(args));
    } catch (const TermError& e) {
      fail(e.what());
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

Term parse_term(std::string_view text) { return Parser(text).parse(); }

Term senc(Term m, Term k) { return Term::app(Symbol::Senc, {std::move(m), std::move(k)}); }
Term pair(Term a, Term b) { return Term::app(Symbol::Pair, {std::move(a), std::move(b)}); }

Term bit(Term seed, std::string_view bitstring, std::string_view position, std::string_view role,
         std::string_view value) {
  return Term::app(Symbol::Bit, {std::move(seed), Term::constant(std::string(bitstring)),
                                 Term::constant(std::string(position)), Term::constant(std::string(role)),
                                 Term::constant(std::string(value))});
}

Term qubit(Term data, Term base) { return Term::app(Symbol::Qubit, {std::move(data), std::move(base)}); }

Term qubit_epr(Term base, Term data, Term id) {
  return Term::app(Symbol::QubitEpr, {std::move(base), std::move(data), std::move(id)});
}

Term tuple(std::span<const Term> items) {
  if (items.empty()) return Term::constant("nil");
  Term acc = items.back();
  for (std::size_t i = items.size() - 1; i-- > 0;) acc = pair(items[i], acc);
  return acc;
}

Term tuple(std::initializer_list<Term> items) { return tuple(std::span<const Term>(items.begin(), items.size())); }

std::optional<std::vector<Term>> untuple(const Term& t, std::size_t count) {
  std::vector<Term> out;
  if (count == 0) {
    if (t.is_const() && t.label() == "nil") return out;
    return std::nullopt;
  }
  Term cur = t;
  for (std::size_t i = 0; i + 1 < count; ++i) {
    if (!cur.is_app(Symbol::Pair)) return std::nullopt;
    out.push_back(cur.arg(0));
    Term next = cur.arg(1);
    cur = next;
  }
  out.push_back(cur);
  return out;
}

std::optional<BitView> BitView::of(const Term& t) {
  if (!t.is_app(Symbol::Bit)) return std::nullopt;
  return BitView{t.arg(0), t.arg(1), t.arg(2), t.arg(3), t.arg(4)};
}

std::optional<Term> flip_value(const Term& value) {
  if (!value.is_const()) return std::nullopt;
  if (value.label() == "0") return Term::constant("1");
  if (value.label() == "1") return Term::constant("0");
  return std::nullopt;
}

bool eq_e(const Term& a, const Term& b) {
  if (compare_site_depth > 0) ++compare_site_eq_e_calls;
  return a == b;
}

namespace {

bool cross_position(const Term& bitstring, const InterchangeabilityConfig& cfg) {
  return bitstring.is_const() && cfg.cross_position_bitstrings.count(bitstring.label()) > 0;
}

// Mirrors interchangeability_key() without allocating: the role argument of a
// bit is ignored, and so is the position for cross-position bitstrings.
bool eq_b_rec(const Term& a, const Term& b, const InterchangeabilityConfig& cfg) {
  if (a.kind() != b.kind()) return false;
  if (!a.is_app()) return a.label() == b.label();
  if (a.symbol() != b.symbol()) return false;
  if (a.symbol() == Symbol::Bit) {
    const bool cross_a = cross_position(a.arg(1), cfg);
    const bool cross_b = cross_position(b.arg(1), cfg);
    if (cross_a != cross_b) return false;
    if (!eq_b_rec(a.arg(0), b.arg(0), cfg) || !eq_b_rec(a.arg(1), b.arg(1), cfg) ||
        !eq_b_rec(a.arg(4), b.arg(4), cfg)) {
      return false;
    }
    return cross_a || eq_b_rec(a.arg(2), b.arg(2), cfg);
  }
  for (std::size_t i = 0; i < a.args().size(); ++i) {
    if (!eq_b_rec(a.arg(i), b.arg(i), cfg)) return false;
  }
  return true;
}

}  // namespace

bool eq_b(const Term& a, const Term& b, const InterchangeabilityConfig& cfg) { return eq_b_rec(a, b, cfg); }

Term interchangeability_key(const Term& t, const InterchangeabilityConfig& cfg) {
  if (!t.is_app()) return t;
  std::vector<Term> args;
  args.reserve(t.args().size());
  for (const Term& a : t.args()) args.push_back(interchangeability_key(a, cfg));
  if (t.symbol() == Symbol::Bit) {
    args[3] = Term::constant("*");
    if (cross_position(t.arg(1), cfg)) args[2] = Term::constant("*");
  }
  return Term::app(t.symbol(), std::move(args));
}

CompareSiteScope::CompareSiteScope() { ++compare_site_depth; }
CompareSiteScope::~CompareSiteScope() { --compare_site_depth; }
std::uint64_t eq_e_calls_from_compare_sites() { return compare_site_eq_e_calls; }
void reset_compare_site_audit() { compare_site_eq_e_calls = 0; }

std::string NameSupply::claim(std::string base) {
  std::string label = base;
  for (int i = 2; used_.count(label); ++i) label = base + "_" + std::to_string(i);
  used_.insert(label);
  return label;
}

Term NameSupply::fresh(std::string_view hint) { return Term::name(claim(std::string(hint))); }

Term NameSupply::fresh_epr_id(std::string_view hint) { return Term::name(claim("#" + std::string(hint))); }

bool NameSupply::used(std::string_view label) const { return used_.find(label) != used_.end(); }

}  // namespace qdy
