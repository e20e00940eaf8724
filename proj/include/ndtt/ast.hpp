#pragma once

#include <compare>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ndtt/error.hpp"

namespace ndtt {

// Flat Datalog terms: constants (lowercase identifiers or integer literals)
// and variables (capitalized identifiers). No nesting.
struct Term {
  enum class Kind { Constant, Variable };
  Kind kind = Kind::Constant;
  std::string text;

  static Term constant(std::string s) { return {Kind::Constant, std::move(s)}; }
  static Term variable(std::string s) { return {Kind::Variable, std::move(s)}; }
  bool is_var() const { return kind == Kind::Variable; }

  auto operator<=>(const Term&) const = default;
};

struct Atom {
  std::string functor;
  std::vector<Term> args;

  bool is_ground() const;
  // canonical textual form `functor(a1,...,aN)`; zero-arg atoms print bare
  std::string str() const;

  auto operator<=>(const Atom&) const = default;
};

using Binding = std::map<std::string, Term>;

Atom substitute(const Atom& a, const Binding& b);
void collect_vars(const Atom& a, std::vector<std::string>& out);

// One-sided match of a pattern against a ground atom.
std::optional<Binding> match_ground(const Atom& pattern, const Atom& ground);

// Most general unifier of two flat atoms (both may contain variables),
// extending `start`. Used by highway unfolding.
std::optional<Binding> unify(const Atom& a, const Atom& b, Binding start = {});

// Resolve a term through a binding (terms are flat, so one step suffices
// per lookup chain).
Term resolve(const Term& t, const Binding& b);

inline bool is_zero_name(const Atom& a) { return a.functor == "0" && a.args.empty(); }

enum class RuleKind { Deductive, Highway, UpdateAdd, UpdateRemove };

struct BodyElem {
  Atom atom;
  bool negated = false;
  std::optional<Atom> param;  // `: name`; functor "0" means the frozen zero matrix
};

struct Rule {
  RuleKind kind = RuleKind::Deductive;
  Atom head;
  std::optional<Atom> beta;  // `head : name`
  std::optional<Atom> bias;  // `: name` right after the connector
  std::vector<BodyElem> body;  // for update rules body[0] is the trigger
  std::optional<Atom> full;  // `:: name`, names the whole W_r incl. bias column
  SourcePos pos;
  int index = -1;  // source order, assigned by validate

  bool is_update() const { return kind == RuleKind::UpdateAdd || kind == RuleKind::UpdateRemove; }
  const Atom* trigger() const {
    return is_update() && !body.empty() ? &body[0].atom : nullptr;
  }
  std::string str() const;
};

struct Declaration {
  enum class Kind { Embed, Event };
  Kind kind = Kind::Embed;
  std::string functor;
  int dim = 0;
  std::optional<Atom> tau;  // event only: `:- event(f, D) : name.`
  SourcePos pos;

  std::string str() const;
};

struct Ast {
  std::vector<Rule> rules;
  std::vector<Declaration> decls;

  std::string str() const;
};

// Canonical renaming of rule variables (V1, V2, ... by first occurrence);
// used to deduplicate alpha-equivalent rules during desugaring.
std::string alpha_key(const Rule& r);

}  // namespace ndtt
