#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ndtt/ast.hpp"

namespace ndtt {

enum class Mode { Continuous, Discrete };

struct FunctorInfo {
  bool declared = false;
  bool is_event = false;
  int dim = 0;
  std::optional<Atom> tau_name;  // defaults to tau(functor) for events
};

// Parameter layout of one rule: the bias column plus one slot per non-negated
// body element, in rule order (the trigger first for update rules).
struct SlotLayout {
  Atom name;           // functor "0" = the frozen zero matrix
  int cols = 0;
  int body_index = -1;  // index into rule.body; -1 for the bias column
};

struct RuleLayout {
  int head_dim = 0;
  int head_dim_plus = 0;  // head_dim + 1 when the head is an event
  bool update = false;
  bool remove = false;
  Atom beta_name;
  std::optional<Atom> full_name;  // `::` name replacing the whole W_r
  std::vector<SlotLayout> slots;  // slot 0 is the bias column
  int concat_cols = 0;            // 1 + sum of condition widths

  int rows(Mode m) const {
    if (!update) return head_dim_plus;
    return (m == Mode::Continuous ? 7 : 3) * head_dim_plus;
  }
};

struct ParamSignature {
  Atom name;
  int rows = 0;
  int cols = 0;
  bool has_vars = false;  // instantiated lazily at grounding time, storage shared per ground name
  std::string role;       // matrix | bias | full | beta | tau
};

struct Program {
  Ast ast;  // desugared core (no highway rules)
  std::map<std::string, FunctorInfo> functors;
  std::map<std::string, int> strata;
  int max_stratum = 0;
  std::vector<RuleLayout> layouts;  // parallel to ast.rules
  uint64_t hash = 0;
  bool mentions_init = false;

  std::vector<int> deductive_rules;
  std::map<std::string, std::vector<int>> deductive_by_head;
  std::map<std::string, std::vector<int>> updates_by_trigger;

  const Rule& rule(int i) const { return ast.rules[static_cast<size_t>(i)]; }
  const FunctorInfo& functor(const std::string& f) const;
  int dim(const std::string& f) const { return functor(f).dim; }
  bool is_event(const std::string& f) const { return functor(f).is_event; }
  int dim_plus(const std::string& f) const {
    const auto& fi = functor(f);
    return fi.dim + (fi.is_event ? 1 : 0);
  }
  int stratum(const std::string& f) const;
  Atom tau_name(const std::string& f) const;

  std::vector<ParamSignature> signatures(Mode m) const;
};

Program validate(const Ast& desugared_ast);

// parse + desugar + validate
Program compile(const std::string& text);
Program load_program(const std::string& path);

}  // namespace ndtt
