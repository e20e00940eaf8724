#include "ndtt/ast.hpp"

#include <sstream>

namespace ndtt {

const char* Error::kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::Syntax: return "SyntaxError";
    case ErrorKind::RangeRestrictionViolation: return "RangeRestrictionViolation";
    case ErrorKind::CyclicDeduction: return "CyclicDeduction";
    case ErrorKind::UnstratifiedNegation: return "UnstratifiedNegation";
    case ErrorKind::DuplicateDeclaration: return "DuplicateDeclaration";
    case ErrorKind::BadAnnotation: return "BadAnnotation";
    case ErrorKind::ShapeConflict: return "ShapeConflict";
    case ErrorKind::UnsupportedExtension: return "UnsupportedExtension";
    case ErrorKind::DataMismatch: return "DataMismatch";
    case ErrorKind::NumericFailure: return "NumericFailure";
    case ErrorKind::Internal: return "InternalError";
  }
  return "Error";
}

std::string Error::format(ErrorKind kind, const std::string& message, SourcePos pos) {
  std::ostringstream os;
  if (pos.line > 0) os << pos.line << ":" << pos.column << ": ";
  os << kind_name(kind) << ": " << message;
  return os.str();
}

bool Atom::is_ground() const {
  for (const auto& t : args)
    if (t.is_var()) return false;
  return true;
}

std::string Atom::str() const {
  if (args.empty()) return functor;
  std::string s = functor;
  s += '(';
  for (size_t i = 0; i < args.size(); ++i) {
    if (i) s += ',';
    s += args[i].text;
  }
  s += ')';
  return s;
}

Atom substitute(const Atom& a, const Binding& b) {
  Atom out;
  out.functor = a.functor;
  out.args.reserve(a.args.size());
  for (const auto& t : a.args) out.args.push_back(resolve(t, b));
  return out;
}

Term resolve(const Term& t, const Binding& b) {
  Term cur = t;
  while (cur.is_var()) {
    auto it = b.find(cur.text);
    if (it == b.end()) break;
    cur = it->second;
  }
  return cur;
}

void collect_vars(const Atom& a, std::vector<std::string>& out) {
  for (const auto& t : a.args)
    if (t.is_var()) out.push_back(t.text);
}

std::optional<Binding> match_ground(const Atom& pattern, const Atom& ground) {
  if (pattern.functor != ground.functor || pattern.args.size() != ground.args.size())
    return std::nullopt;
  Binding b;
  for (size_t i = 0; i < pattern.args.size(); ++i) {
    const Term& p = pattern.args[i];
    const Term& g = ground.args[i];
    if (p.is_var()) {
      auto [it, fresh] = b.emplace(p.text, g);
      if (!fresh && it->second != g) return std::nullopt;
    } else if (p != g) {
      return std::nullopt;
    }
  }
  return b;
}

std::optional<Binding> unify(const Atom& a, const Atom& b, Binding start) {
  if (a.functor != b.functor || a.args.size() != b.args.size()) return std::nullopt;
  Binding env = std::move(start);
  for (size_t i = 0; i < a.args.size(); ++i) {
    Term x = resolve(a.args[i], env);
    Term y = resolve(b.args[i], env);
    if (x == y) continue;
    // prefer binding b's variables so unfolding keeps the host rule's names
    if (y.is_var())
      env[y.text] = x;
    else if (x.is_var())
      env[x.text] = y;
    else
      return std::nullopt;
  }
  return env;
}

namespace {

void print_param(std::ostringstream& os, const std::optional<Atom>& p) {
  if (p) os << " : " << p->str();
}

}  // namespace

std::string Rule::str() const {
  std::ostringstream os;
  if (kind == RuleKind::UpdateRemove) os << '!';
  os << head.str();
  print_param(os, beta);
  if (body.empty() && !bias) {
    if (full) os << " :: " << full->str();
    os << '.';
    return os.str();
  }
  switch (kind) {
    case RuleKind::Deductive: os << " :- "; break;
    case RuleKind::Highway: os << " :-- "; break;
    case RuleKind::UpdateAdd:
    case RuleKind::UpdateRemove: os << " <- "; break;
  }
  bool first = true;
  if (bias) {
    os << ": " << bias->str();
    first = false;
  }
  for (const auto& e : body) {
    if (!first) os << ", ";
    first = false;
    if (e.negated) os << '!';
    os << e.atom.str();
    print_param(os, e.param);
  }
  if (full) os << " :: " << full->str();
  os << '.';
  return os.str();
}

std::string Declaration::str() const {
  std::ostringstream os;
  os << ":- " << (kind == Kind::Embed ? "embed" : "event") << '(' << functor << ", " << dim << ')';
  if (tau) os << " : " << tau->str();
  os << '.';
  return os.str();
}

std::string Ast::str() const {
  std::ostringstream os;
  for (const auto& d : decls) os << d.str() << '\n';
  for (const auto& r : rules) os << r.str() << '\n';
  return os.str();
}

std::string alpha_key(const Rule& r) {
  std::map<std::string, std::string> ren;
  auto canon = [&](const Atom& a) {
    Atom out = a;
    for (auto& t : out.args) {
      if (!t.is_var()) continue;
      auto [it, fresh] = ren.emplace(t.text, "V" + std::to_string(ren.size() + 1));
      t.text = it->second;
    }
    return out.str();
  };
  std::ostringstream os;
  os << static_cast<int>(r.kind) << '|' << canon(r.head) << '|';
  if (r.beta) os << canon(*r.beta);
  os << '|';
  if (r.bias) os << canon(*r.bias);
  for (const auto& e : r.body) {
    os << '|' << (e.negated ? "!" : "") << canon(e.atom) << ':';
    if (e.param) os << canon(*e.param);
  }
  os << '|';
  if (r.full) os << canon(*r.full);
  return os.str();
}

}  // namespace ndtt
