#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "ndtt/program.hpp"

namespace ndtt::engine {

// One way a deductive rule proves a fact: the ground non-negated condition
// atoms in rule order, plus the variable binding that produced them.
struct Proof {
  std::vector<Atom> body;
  Binding binding;

  bool operator<(const Proof& o) const { return body < o.body; }
};

struct FactInfo {
  // rule index -> instantiations, sorted canonically (index m is the position)
  std::map<int, std::vector<Proof>> proofs;
};

struct UpdateMatch {
  int rule_index = -1;
  bool remove = false;
  Atom head;
  Atom trigger;
  std::vector<Atom> body;  // ground non-negated condition atoms, rule order
  Binding binding;
  int m = 0;  // canonical ordinal within (head, rule)
};

class DatabaseState {
public:
  explicit DatabaseState(const Program& prog, bool memo_enabled = true);

  const Program& program() const { return *prog_; }

  const std::map<Atom, FactInfo>& facts() const { return facts_; }
  bool is_fact(const Atom& a) const { return facts_.count(a) != 0; }
  const FactInfo* fact(const Atom& a) const;
  const std::set<Atom>& adrift() const { return adrift_; }
  bool is_adrift(const Atom& a) const { return adrift_.count(a) != 0; }

  std::vector<Atom> possible_events() const;

  // All facts matching a pattern, in canonical order; memoized per
  // (functor, argument pattern) and flushed on every change. Returns by
  // value: results stay usable while further queries run.
  std::vector<Atom> query(const Atom& pattern) const;

  // Least fixpoint of the deductive rules over the current adrift set.
  // Throws CyclicDeduction when the ground proof relation is cyclic.
  void recompute();

  struct ApplyResult {
    std::vector<Atom> docked;    // cell set to null (before any relaunch)
    std::vector<Atom> launched;  // heads with at least one add-match
  };
  // Docks remove-heads first, then launches add-heads, then recomputes the
  // fixpoint and flushes the memo.
  ApplyResult apply_symbolic(const std::vector<UpdateMatch>& matches);

  void set_memo_enabled(bool on);
  size_t memo_hits() const { return memo_hits_; }

  // one fact per line, sorted, with adrift atoms flagged
  std::string dump() const;

private:
  void flush_memo() const;

  const Program* prog_;
  bool memo_enabled_;
  std::set<Atom> adrift_;
  std::map<Atom, FactInfo> facts_;
  std::map<std::string, std::vector<Atom>> by_functor_;  // fact index
  mutable std::map<std::string, std::vector<Atom>> memo_;
  mutable size_t memo_hits_ = 0;
};

DatabaseState init_state(const Program& prog, bool memo_enabled = true);

// All add/remove matches across update rules for the given simultaneous
// ground events, checked against the pre-update state.
std::vector<UpdateMatch> match_updates(const Program& prog, const DatabaseState& state,
                                       const std::vector<Atom>& events);

}  // namespace ndtt::engine
