#include "ndtt/program.hpp"

#include <algorithm>
#include <functional>
#include <set>

#include "ndtt/desugar.hpp"
#include "ndtt/parser.hpp"
#include "ndtt/rng.hpp"

namespace ndtt {

namespace {

const FunctorInfo kUndeclared{};  // D = 0, not an event

std::set<std::string> atom_vars(const Atom& a) {
  std::vector<std::string> vs;
  collect_vars(a, vs);
  return {vs.begin(), vs.end()};
}

Atom default_name(int rule_index, const std::string& tag) {
  return Atom{"params", {Term::constant(std::to_string(rule_index)), Term::constant(tag)}};
}

Atom default_name(int rule_index, int slot) {
  return Atom{"params", {Term::constant(std::to_string(rule_index)), Term::constant(std::to_string(slot))}};
}

void check_name_vars(const Atom& name, const std::set<std::string>& allowed,
                     const Rule& r, const char* what) {
  for (const auto& v : atom_vars(name))
    if (!allowed.count(v))
      throw Error(ErrorKind::BadAnnotation,
                  std::string(what) + " name " + name.str() + " mentions variable " + v +
                      " not available in rule " + std::to_string(r.index) + ": " + r.str(),
                  r.pos);
}

// Tarjan SCC over the functor-level deductive dependency graph; strata by
// longest path in the condensation, +1 across negated edges.
struct Strata {
  std::map<std::string, int> stratum;
  int max_stratum = 0;
};

Strata stratify(const Ast& ast) {
  struct Edge {
    std::string to;
    bool neg;
    SourcePos pos;
  };
  std::map<std::string, std::vector<Edge>> g;
  auto touch = [&](const std::string& f) { g.emplace(f, std::vector<Edge>{}); };
  for (const auto& d : ast.decls) touch(d.functor);
  for (const auto& r : ast.rules) {
    touch(r.head.functor);
    for (const auto& e : r.body) touch(e.atom.functor);
    if (r.kind != RuleKind::Deductive) continue;
    for (const auto& e : r.body)
      g[r.head.functor].push_back({e.atom.functor, e.negated, r.pos});
  }

  std::map<std::string, int> idx, low, comp;
  std::vector<std::string> stack;
  std::set<std::string> on_stack;
  std::vector<std::vector<std::string>> sccs;
  int counter = 0;
  std::function<void(const std::string&)> dfs = [&](const std::string& u) {
    idx[u] = low[u] = counter++;
    stack.push_back(u);
    on_stack.insert(u);
    for (const auto& e : g[u]) {
      if (!idx.count(e.to)) {
        dfs(e.to);
        low[u] = std::min(low[u], low[e.to]);
      } else if (on_stack.count(e.to)) {
        low[u] = std::min(low[u], idx[e.to]);
      }
    }
    if (low[u] == idx[u]) {
      std::vector<std::string> scc;
      while (true) {
        std::string v = stack.back();
        stack.pop_back();
        on_stack.erase(v);
        comp[v] = static_cast<int>(sccs.size());
        scc.push_back(v);
        if (v == u) break;
      }
      sccs.push_back(std::move(scc));
    }
  };
  for (const auto& [f, _] : g)
    if (!idx.count(f)) dfs(f);

  // negated edge within an SCC = unstratified negation
  for (const auto& [u, edges] : g)
    for (const auto& e : edges)
      if (e.neg && comp[u] == comp[e.to]) {
        std::string members;
        for (const auto& m : sccs[comp[u]]) members += (members.empty() ? "" : ", ") + m;
        throw Error(ErrorKind::UnstratifiedNegation,
                    "negation of " + e.to + " inside the recursive component {" + members + "}",
                    e.pos);
      }

  // Tarjan emits SCCs after all their successors, so a single pass suffices
  std::vector<int> level(sccs.size(), 0);
  for (size_t c = 0; c < sccs.size(); ++c)
    for (const auto& u : sccs[c])
      for (const auto& e : g[u]) {
        int dep = level[comp[e.to]] + (e.neg ? 1 : 0);
        if (comp[e.to] != static_cast<int>(c)) level[c] = std::max(level[c], dep);
      }

  Strata out;
  for (const auto& [f, _] : g) {
    out.stratum[f] = level[comp[f]];
    out.max_stratum = std::max(out.max_stratum, level[comp[f]]);
  }
  return out;
}

}  // namespace

const FunctorInfo& Program::functor(const std::string& f) const {
  auto it = functors.find(f);
  return it == functors.end() ? kUndeclared : it->second;
}

int Program::stratum(const std::string& f) const {
  auto it = strata.find(f);
  return it == strata.end() ? 0 : it->second;
}

Atom Program::tau_name(const std::string& f) const {
  const auto& fi = functor(f);
  if (fi.tau_name) return *fi.tau_name;
  return Atom{"tau", {Term::constant(f)}};
}

Program validate(const Ast& in) {
  Program p;
  p.ast = in;

  for (const auto& d : p.ast.decls) {
    if (d.dim < 0)
      throw Error(ErrorKind::Syntax, "negative embedding dimension", d.pos);
    auto [it, fresh] = p.functors.emplace(d.functor, FunctorInfo{});
    if (!fresh)
      throw Error(ErrorKind::DuplicateDeclaration,
                  "functor " + d.functor + " declared more than once", d.pos);
    it->second.declared = true;
    it->second.is_event = d.kind == Declaration::Kind::Event;
    it->second.dim = d.dim;
    it->second.tau_name = d.tau;
  }

  for (size_t i = 0; i < p.ast.rules.size(); ++i) {
    Rule& r = p.ast.rules[i];
    r.index = static_cast<int>(i);
    if (r.kind == RuleKind::Highway)
      throw Error(ErrorKind::Internal, "highway rule reached validate(); run desugar first", r.pos);
    if (r.is_update()) {
      if (r.body.empty())
        throw Error(ErrorKind::Syntax, "update rule without a trigger", r.pos);
      if (r.body[0].negated)
        throw Error(ErrorKind::Syntax, "the trigger of an update rule may not be negated", r.pos);
    }
    if (r.kind == RuleKind::UpdateRemove) {
      // remove rules perform no numeric update; annotations are inert
      r.beta.reset();
      r.bias.reset();
      r.full.reset();
      for (auto& e : r.body) e.param.reset();
    }

    std::set<std::string> pos_vars;
    for (const auto& e : r.body)
      if (!e.negated)
        for (const auto& v : atom_vars(e.atom)) pos_vars.insert(v);
    for (const auto& v : atom_vars(r.head))
      if (!pos_vars.count(v))
        throw Error(ErrorKind::RangeRestrictionViolation,
                    "head variable " + v + " does not occur in a non-negated body atom in rule " +
                        std::to_string(r.index) + ": " + r.str(),
                    r.pos);
    for (const auto& e : r.body)
      if (e.negated)
        for (const auto& v : atom_vars(e.atom))
          if (!pos_vars.count(v))
            throw Error(ErrorKind::RangeRestrictionViolation,
                        "variable " + v + " occurs only under negation in rule " +
                            std::to_string(r.index) + ": " + r.str(),
                        r.pos);

    // a rule whose head literally recurs in its own positive body can never
    // be grounded acyclically
    if (r.kind == RuleKind::Deductive)
      for (const auto& e : r.body)
        if (!e.negated && e.atom == r.head)
          throw Error(ErrorKind::CyclicDeduction,
                      "atom " + r.head.str() + " participates in its own proof in rule " +
                          std::to_string(r.index),
                      r.pos);

    std::set<std::string> all_vars = pos_vars;
    for (const auto& e : r.body)
      for (const auto& v : atom_vars(e.atom)) all_vars.insert(v);

    if (r.full && (r.bias || std::any_of(r.body.begin(), r.body.end(),
                                         [](const BodyElem& e) { return e.param.has_value(); })))
      throw Error(ErrorKind::BadAnnotation,
                  "'::' names the whole matrix and cannot be combined with per-slot annotations",
                  r.pos);
    if (r.beta) check_name_vars(*r.beta, atom_vars(r.head), r, "beta");
    if (r.bias) check_name_vars(*r.bias, all_vars, r, "bias");
    if (r.full) check_name_vars(*r.full, all_vars, r, "matrix");
    for (const auto& e : r.body)
      if (e.param) check_name_vars(*e.param, all_vars, r, "matrix");
  }

  Strata st = stratify(p.ast);
  p.strata = std::move(st.stratum);
  p.max_stratum = st.max_stratum;

  for (const auto& r : p.ast.rules) {
    RuleLayout lay;
    lay.head_dim = p.dim(r.head.functor);
    lay.head_dim_plus = p.dim_plus(r.head.functor);
    lay.update = r.is_update();
    lay.remove = r.kind == RuleKind::UpdateRemove;
    lay.beta_name = r.beta.value_or(default_name(r.index, "beta"));
    lay.full_name = r.full;
    SlotLayout bias;
    bias.name = r.bias.value_or(default_name(r.index, "bias"));
    bias.cols = 1;
    lay.slots.push_back(bias);
    int cond_count = 0;
    for (size_t k = 0; k < r.body.size(); ++k) {
      const BodyElem& e = r.body[k];
      if (e.negated) continue;  // negated slots contribute no columns
      SlotLayout s;
      s.body_index = static_cast<int>(k);
      s.cols = p.dim(e.atom.functor);
      bool is_trigger = r.is_update() && k == 0;
      if (!is_trigger) ++cond_count;  // positional numbering, annotated or not
      s.name = e.param.value_or(is_trigger ? default_name(r.index, 0)
                                           : default_name(r.index, cond_count));
      lay.slots.push_back(std::move(s));
    }
    lay.concat_cols = 1;
    for (size_t k = 1; k < lay.slots.size(); ++k) lay.concat_cols += lay.slots[k].cols;
    p.layouts.push_back(std::move(lay));

    if (r.kind == RuleKind::Deductive) {
      p.deductive_rules.push_back(r.index);
      p.deductive_by_head[r.head.functor].push_back(r.index);
    } else {
      p.updates_by_trigger[r.body[0].atom.functor].push_back(r.index);
    }
    for (const auto& e : r.body)
      if (e.atom.functor == "init") p.mentions_init = true;
    if (r.head.functor == "init") p.mentions_init = true;
  }

  p.hash = fnv1a64(p.ast.str());
  return p;
}

std::vector<ParamSignature> Program::signatures(Mode m) const {
  std::map<std::string, ParamSignature> by_name;
  // names that mention variables denote a ground family; everything sharing
  // their (functor, arity) must agree on shape or groundings would collide
  using Fam = std::pair<std::string, size_t>;
  std::map<Fam, std::set<std::pair<int, int>>> fam_shapes;
  std::map<Fam, std::pair<int, int>> fam_var_shape;
  auto add = [&](const Atom& name, int rows, int cols, const std::string& role) {
    if (is_zero_name(name) || rows == 0 || cols == 0) return;
    bool has_vars = !name.is_ground();
    Fam fam{name.functor, name.args.size()};
    fam_shapes[fam].insert({rows, cols});
    if (has_vars) fam_var_shape.emplace(fam, std::make_pair(rows, cols));
    auto [it, inserted] = by_name.emplace(name.str(), ParamSignature{name, rows, cols, has_vars, role});
    if (!inserted && (it->second.rows != rows || it->second.cols != cols))
      throw Error(ErrorKind::ShapeConflict, "parameter name " + name.str() + " used with shapes " +
                                                std::to_string(it->second.rows) + "x" +
                                                std::to_string(it->second.cols) + " and " +
                                                std::to_string(rows) + "x" + std::to_string(cols));
  };
  for (size_t i = 0; i < ast.rules.size(); ++i) {
    const RuleLayout& lay = layouts[i];
    if (lay.remove) continue;
    int rows = lay.rows(m);
    if (rows == 0) continue;
    add(lay.beta_name, 1, 1, "beta");
    if (lay.full_name) {
      add(*lay.full_name, rows, lay.concat_cols, "full");
      continue;
    }
    add(lay.slots[0].name, rows, 1, "bias");
    for (size_t k = 1; k < lay.slots.size(); ++k)
      add(lay.slots[k].name, rows, lay.slots[k].cols, "matrix");
  }
  for (const auto& [f, fi] : functors)
    if (fi.is_event) add(tau_name(f), 1, 1, "tau");
  for (const auto& [fam, var_shape] : fam_var_shape)
    for (const auto& shape : fam_shapes[fam])
      if (shape != var_shape)
        throw Error(ErrorKind::ShapeConflict,
                    "parameter family " + fam.first + "/" + std::to_string(fam.second) +
                        " is used with shapes " + std::to_string(var_shape.first) + "x" +
                        std::to_string(var_shape.second) + " and " + std::to_string(shape.first) +
                        "x" + std::to_string(shape.second));
  std::vector<ParamSignature> out;
  out.reserve(by_name.size());
  for (auto& [_, sig] : by_name) out.push_back(std::move(sig));
  return out;
}

Program compile(const std::string& text) { return validate(desugar_highways(parse_program(text))); }

Program load_program(const std::string& path) {
  return validate(desugar_highways(parse_file(path)));
}

}  // namespace ndtt
