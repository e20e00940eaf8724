#include "ndtt/engine.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

namespace ndtt::engine {

namespace {

// Backtracking join over the rule body. Non-negated conditions are matched in
// order against `index`; negated conditions are checked once fully ground.
// `delta_pos` (when >= 0) restricts that body position to atoms in `delta`.
struct Joiner {
  const Rule& rule;
  const std::map<std::string, std::vector<Atom>>& index;
  int delta_pos = -1;
  const std::set<Atom>* delta = nullptr;
  size_t start_pos = 0;
  const std::function<void(const Binding&, std::vector<Atom>&)> sink;

  std::vector<Atom> body_acc;

  void run(Binding binding) { step(start_pos, std::move(binding)); }

  void step(size_t pos, Binding binding) {
    if (pos == rule.body.size()) {
      for (const auto& e : rule.body) {
        if (!e.negated) continue;
        Atom g = substitute(e.atom, binding);
        if (index.count(g.functor)) {
          const auto& v = index.at(g.functor);
          if (std::binary_search(v.begin(), v.end(), g)) return;  // negated condition holds
        }
      }
      sink(binding, body_acc);
      return;
    }
    const BodyElem& e = rule.body[pos];
    if (e.negated) {
      step(pos + 1, std::move(binding));
      return;
    }
    Atom pattern = substitute(e.atom, binding);
    auto try_candidate = [&](const Atom& cand) {
      auto extra = match_ground(pattern, cand);
      if (!extra) return;
      Binding next = binding;
      for (auto& [k, v] : *extra) next.emplace(k, v);
      body_acc.push_back(cand);
      step(pos + 1, std::move(next));
      body_acc.pop_back();
    };
    if (static_cast<int>(pos) == delta_pos) {
      for (const Atom& cand : *delta)
        if (cand.functor == pattern.functor) try_candidate(cand);
    } else {
      auto it = index.find(pattern.functor);
      if (it == index.end()) return;
      // the sink may add facts of this very functor mid-iteration (recursive
      // rules), so snapshot the candidates; later additions are picked up by
      // the delta-driven passes
      std::vector<Atom> candidates = it->second;
      for (const Atom& cand : candidates) try_candidate(cand);
    }
  }
};

void sorted_insert(std::vector<Atom>& v, const Atom& a) {
  v.insert(std::lower_bound(v.begin(), v.end(), a), a);
}

}  // namespace

DatabaseState::DatabaseState(const Program& prog, bool memo_enabled)
    : prog_(&prog), memo_enabled_(memo_enabled) {}

const FactInfo* DatabaseState::fact(const Atom& a) const {
  auto it = facts_.find(a);
  return it == facts_.end() ? nullptr : &it->second;
}

std::vector<Atom> DatabaseState::possible_events() const {
  std::vector<Atom> out;
  for (const auto& [atom, _] : facts_)
    if (prog_->is_event(atom.functor)) out.push_back(atom);
  return out;
}

std::vector<Atom> DatabaseState::query(const Atom& pattern) const {
  std::string key = pattern.str();
  if (memo_enabled_) {
    auto it = memo_.find(key);
    if (it != memo_.end()) {
      ++memo_hits_;
      return it->second;
    }
  }
  std::vector<Atom> result;
  auto fit = by_functor_.find(pattern.functor);
  if (fit != by_functor_.end())
    for (const Atom& a : fit->second)
      if (match_ground(pattern, a)) result.push_back(a);
  if (memo_enabled_) memo_.emplace(key, result);
  return result;
}

void DatabaseState::set_memo_enabled(bool on) {
  memo_enabled_ = on;
  flush_memo();
}

void DatabaseState::flush_memo() const { memo_.clear(); }

void DatabaseState::recompute() {
  facts_.clear();
  by_functor_.clear();
  flush_memo();

  // group rules and adrift seeds by stratum
  std::map<int, std::vector<int>> rules_by_stratum;
  for (int ri : prog_->deductive_rules)
    rules_by_stratum[prog_->stratum(prog_->rule(ri).head.functor)].push_back(ri);
  std::map<int, std::vector<Atom>> seeds_by_stratum;
  for (const Atom& a : adrift_) seeds_by_stratum[prog_->stratum(a.functor)].push_back(a);

  std::map<Atom, std::map<int, std::set<Proof>>> proof_acc;

  auto add_fact = [&](const Atom& a) -> bool {
    auto [it, fresh] = facts_.emplace(a, FactInfo{});
    if (fresh) sorted_insert(by_functor_[a.functor], a);
    return fresh;
  };

  for (int s = 0; s <= prog_->max_stratum; ++s) {
    std::vector<Atom> pending;
    for (const Atom& seed : seeds_by_stratum[s])
      if (add_fact(seed)) pending.push_back(seed);

    auto record = [&](int ri, const Atom& head, const Binding& b, const std::vector<Atom>& body) {
      if (proof_acc[head][ri].insert(Proof{body, b}).second && add_fact(head))
        pending.push_back(head);
    };

    const auto& stratum_rules = rules_by_stratum[s];
    // full pass, then delta-driven passes to a fixpoint
    for (int ri : stratum_rules) {
      const Rule& r = prog_->rule(ri);
      Joiner j{r, by_functor_, -1, nullptr, 0,
               [&](const Binding& b, std::vector<Atom>& body) {
                 record(ri, substitute(r.head, b), b, body);
               },
               {}};
      j.run({});
    }
    while (!pending.empty()) {
      std::set<Atom> delta(pending.begin(), pending.end());
      pending.clear();
      for (int ri : stratum_rules) {
        const Rule& r = prog_->rule(ri);
        for (size_t pos = 0; pos < r.body.size(); ++pos) {
          if (r.body[pos].negated) continue;
          if (prog_->stratum(r.body[pos].atom.functor) != s) continue;
          Joiner j{r, by_functor_, static_cast<int>(pos), &delta, 0,
                   [&](const Binding& b, std::vector<Atom>& body) {
                     record(ri, substitute(r.head, b), b, body);
                   },
                   {}};
          j.run({});
        }
      }
    }
  }

  for (auto& [head, by_rule] : proof_acc) {
    FactInfo& fi = facts_.at(head);
    for (auto& [ri, set] : by_rule)
      fi.proofs.emplace(ri, std::vector<Proof>(set.begin(), set.end()));
  }

  // the ground proof relation must be acyclic: an atom participating in its
  // own proof would make its embedding circular
  std::map<Atom, std::vector<const Atom*>> out_edges;
  std::map<Atom, int> indegree;
  for (const auto& [head, fi] : facts_) {
    indegree.emplace(head, 0);
    for (const auto& [_, proofs] : fi.proofs)
      for (const auto& pr : proofs)
        for (const Atom& g : pr.body) {
          out_edges[g].push_back(&head);
          ++indegree[head];
        }
  }
  std::vector<const Atom*> queue;
  for (const auto& [a, d] : indegree)
    if (d == 0) queue.push_back(&a);
  size_t seen = 0;
  while (seen < queue.size()) {
    const Atom* a = queue[seen++];
    auto it = out_edges.find(*a);
    if (it == out_edges.end()) continue;
    for (const Atom* h : it->second)
      if (--indegree[*h] == 0) queue.push_back(h);
  }
  if (seen < indegree.size()) {
    // every remaining node keeps a remaining predecessor, so walking
    // backwards must close a cycle
    std::map<Atom, Atom> pred;
    for (const auto& [g, heads] : out_edges)
      if (indegree.at(g) > 0)
        for (const Atom* h : heads)
          if (indegree.at(*h) > 0) pred.emplace(*h, g);
    Atom cur;
    for (const auto& [a, d] : indegree)
      if (d > 0) {
        cur = a;
        break;
      }
    std::vector<Atom> path{cur};
    std::set<Atom> on_path{cur};
    while (true) {
      cur = pred.at(cur);
      if (on_path.count(cur)) break;
      path.push_back(cur);
      on_path.insert(cur);
    }
    std::string witness = cur.str();
    for (auto it = path.rbegin(); it != path.rend(); ++it) {
      witness += " -> " + it->str();
      if (*it == cur) break;
    }
    throw Error(ErrorKind::CyclicDeduction, "ground proof relation is cyclic: " + witness);
  }
}

DatabaseState::ApplyResult DatabaseState::apply_symbolic(const std::vector<UpdateMatch>& matches) {
  ApplyResult res;
  std::set<Atom> docked, launched;
  for (const auto& m : matches)
    if (m.remove) docked.insert(m.head);
  for (const auto& m : matches)
    if (!m.remove) launched.insert(m.head);
  // dock first, then launch: a head hit by both is relaunched from a zero cell
  for (const Atom& a : docked) adrift_.erase(a);
  for (const Atom& a : launched) adrift_.insert(a);
  recompute();
  res.docked.assign(docked.begin(), docked.end());
  res.launched.assign(launched.begin(), launched.end());
  return res;
}

std::string DatabaseState::dump() const {
  std::ostringstream os;
  for (const auto& [a, _] : facts_) {
    os << a.str();
    if (adrift_.count(a)) os << " [adrift]";
    os << '\n';
  }
  return os.str();
}

DatabaseState init_state(const Program& prog, bool memo_enabled) {
  DatabaseState st(prog, memo_enabled);
  st.recompute();
  return st;
}

std::vector<UpdateMatch> match_updates(const Program& prog, const DatabaseState& state,
                                       const std::vector<Atom>& events) {
  std::vector<UpdateMatch> out;
  for (const Atom& ev : events) {
    if (!ev.is_ground())
      throw Error(ErrorKind::DataMismatch, "event atom is not ground: " + ev.str());
    auto it = prog.updates_by_trigger.find(ev.functor);
    if (it == prog.updates_by_trigger.end()) continue;
    for (int ri : it->second) {
      const Rule& r = prog.rule(ri);
      auto b0 = match_ground(r.body[0].atom, ev);
      if (!b0) continue;
      // conditions are checked against the pre-update state at time s
      std::function<void(size_t, Binding, std::vector<Atom>&)> step =
          [&](size_t pos, Binding binding, std::vector<Atom>& acc) {
            if (pos == r.body.size()) {
              for (size_t k = 1; k < r.body.size(); ++k) {
                if (!r.body[k].negated) continue;
                Atom g = substitute(r.body[k].atom, binding);
                if (state.is_fact(g)) return;
              }
              UpdateMatch m;
              m.rule_index = ri;
              m.remove = r.kind == RuleKind::UpdateRemove;
              m.head = substitute(r.head, binding);
              m.trigger = ev;
              m.body = acc;
              m.binding = std::move(binding);
              out.push_back(std::move(m));
              return;
            }
            const BodyElem& e = r.body[pos];
            if (e.negated) {
              step(pos + 1, std::move(binding), acc);
              return;
            }
            Atom pattern = substitute(e.atom, binding);
            for (const Atom& cand : state.query(pattern)) {
              auto extra = match_ground(pattern, cand);
              if (!extra) continue;
              Binding next = binding;
              for (auto& [k, v] : *extra) next.emplace(k, v);
              acc.push_back(cand);
              step(pos + 1, std::move(next), acc);
              acc.pop_back();
            }
          };
      std::vector<Atom> acc;
      step(1, *b0, acc);
    }
  }
  // canonical instantiation ordering within each (head, rule) group
  std::stable_sort(out.begin(), out.end(), [](const UpdateMatch& a, const UpdateMatch& b) {
    if (a.rule_index != b.rule_index) return a.rule_index < b.rule_index;
    if (a.head != b.head) return a.head < b.head;
    if (a.trigger != b.trigger) return a.trigger < b.trigger;
    return a.body < b.body;
  });
  for (size_t i = 0; i < out.size(); ++i) {
    if (i > 0 && out[i].rule_index == out[i - 1].rule_index && out[i].head == out[i - 1].head)
      out[i].m = out[i - 1].m + 1;
    else
      out[i].m = 0;
  }
  return out;
}

}  // namespace ndtt::engine
