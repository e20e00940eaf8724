#include "ndtt/desugar.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace ndtt {

namespace {

std::set<std::string> rule_vars(const Rule& r) {
  std::vector<std::string> vs;
  collect_vars(r.head, vs);
  for (const auto& e : r.body) collect_vars(e.atom, vs);
  return {vs.begin(), vs.end()};
}

// Renames the definition's variables away from those used in the host rule,
// preferring the original names when there is no clash.
Rule rename_apart(const Rule& def, const std::set<std::string>& used) {
  std::set<std::string> own = rule_vars(def);
  Binding ren;
  int counter = 0;
  for (const auto& v : own) {
    if (!used.count(v)) continue;
    std::string fresh;
    do {
      fresh = v + "_" + std::to_string(++counter);
    } while (used.count(fresh) || own.count(fresh));
    ren[v] = Term::variable(fresh);
  }
  if (ren.empty()) return def;
  Rule out = def;
  out.head = substitute(out.head, ren);
  for (auto& e : out.body) e.atom = substitute(e.atom, ren);
  return out;
}

const Atom kZero{"0", {}};

// Builds the unfolded variant of `host` at body position `pos` using
// definition `def` (a highway rule, already renamed apart). Returns nullopt
// when the heads do not unify.
std::optional<Rule> unfold_at(const Rule& host, size_t pos, const Rule& def) {
  auto mgu = unify(host.body[pos].atom, def.head);
  if (!mgu) return std::nullopt;
  Rule out;
  out.kind = host.kind;
  out.pos = host.pos;
  out.head = substitute(host.head, *mgu);
  bool host_is_update = host.is_update();
  for (size_t k = 0; k < host.body.size(); ++k) {
    if (k == pos && !(host_is_update && k == 0)) {
      // replaced by the definition body (fresh default parameters)
      for (const auto& de : def.body) {
        BodyElem e;
        e.negated = de.negated;
        e.atom = substitute(de.atom, *mgu);
        out.body.push_back(std::move(e));
      }
      continue;
    }
    BodyElem e;
    e.negated = host.body[k].negated;
    e.atom = substitute(host.body[k].atom, *mgu);
    if (!e.negated) e.param = kZero;
    out.body.push_back(std::move(e));
    if (k == pos) {
      // retained trigger; the definition body follows it
      for (const auto& de : def.body) {
        BodyElem s;
        s.negated = de.negated;
        s.atom = substitute(de.atom, *mgu);
        out.body.push_back(std::move(s));
      }
    }
  }
  return out;
}

void check_highway_acyclic(const std::map<std::string, std::vector<const Rule*>>& defs) {
  // 0 = unvisited, 1 = on stack, 2 = done
  std::map<std::string, int> mark;
  std::vector<std::string> stack;
  auto dfs = [&](auto&& self, const std::string& f) -> void {
    mark[f] = 1;
    stack.push_back(f);
    for (const Rule* r : defs.at(f)) {
      for (const auto& e : r->body) {
        if (e.negated || !defs.count(e.atom.functor)) continue;
        const std::string& g = e.atom.functor;
        int m = mark.count(g) ? mark[g] : 0;
        if (m == 1) {
          std::string cycle;
          auto it = std::find(stack.begin(), stack.end(), g);
          for (; it != stack.end(); ++it) cycle += *it + " -> ";
          cycle += g;
          throw Error(ErrorKind::CyclicDeduction,
                      "cyclic highway definitions: " + cycle, r->pos);
        }
        if (m == 0) self(self, g);
      }
    }
    mark[f] = 2;
    stack.pop_back();
  };
  for (const auto& [f, _] : defs)
    if (!mark.count(f) || mark[f] == 0) dfs(dfs, f);
}

}  // namespace

Ast desugar_highways(const Ast& ast) {
  std::map<std::string, std::vector<const Rule*>> raw_defs;
  for (const auto& r : ast.rules)
    if (r.kind == RuleKind::Highway) raw_defs[r.head.functor].push_back(&r);
  if (raw_defs.empty()) return ast;
  check_highway_acyclic(raw_defs);

  // Transitively close the definition set: unfolding a `:--` body element by
  // another `:--` rule yields a new `:--` definition. Functors are processed
  // dependencies-first, so one pass per functor saturates.
  std::map<std::string, std::vector<Rule>> defs;
  for (const auto& [f, rs] : raw_defs)
    for (const Rule* r : rs) defs[f].push_back(*r);

  std::set<std::string> done;
  auto saturate = [&](auto&& self, const std::string& f) -> void {
    if (done.count(f)) return;
    done.insert(f);
    std::vector<Rule>& rules = defs[f];
    std::set<std::string> seen;
    for (const auto& r : rules) seen.insert(alpha_key(r));
    for (size_t i = 0; i < rules.size(); ++i) {
      Rule host = rules[i];  // copy: `rules` may grow
      for (size_t pos = 0; pos < host.body.size(); ++pos) {
        if (host.body[pos].negated) continue;
        auto dit = defs.find(host.body[pos].atom.functor);
        if (dit == defs.end()) continue;
        self(self, dit->first);
        for (const Rule& def : defs[dit->first]) {
          Rule renamed = rename_apart(def, rule_vars(host));
          auto v = unfold_at(host, pos, renamed);
          if (!v) continue;
          v->kind = RuleKind::Highway;
          if (seen.insert(alpha_key(*v)).second) rules.push_back(std::move(*v));
        }
      }
    }
  };
  for (const auto& [f, _] : raw_defs) saturate(saturate, f);

  Ast out;
  out.decls = ast.decls;
  std::set<std::string> seen;
  auto push = [&](Rule r) {
    if (r.kind == RuleKind::Highway) r.kind = RuleKind::Deductive;
    if (seen.insert(alpha_key(r)).second) out.rules.push_back(std::move(r));
  };
  // originals first (with saturated :-- families inserted where the first
  // definition of that functor appeared), then unfold variants
  std::set<std::string> emitted_defs;
  std::vector<Rule> hosts;
  for (const auto& r : ast.rules) {
    if (r.kind == RuleKind::Highway) {
      if (emitted_defs.insert(r.head.functor).second)
        for (const Rule& d : defs[r.head.functor]) push(d);
    } else {
      push(r);
      hosts.push_back(r);
    }
  }
  for (const auto& host : hosts) {
    for (size_t pos = 0; pos < host.body.size(); ++pos) {
      if (host.body[pos].negated) continue;
      auto dit = defs.find(host.body[pos].atom.functor);
      if (dit == defs.end()) continue;
      for (const Rule& def : dit->second) {
        Rule renamed = rename_apart(def, rule_vars(host));
        auto v = unfold_at(host, pos, renamed);
        if (v) push(std::move(*v));
      }
    }
  }
  return out;
}

}  // namespace ndtt
