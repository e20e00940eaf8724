#include "ndtt/semantics.hpp"

#include <algorithm>

namespace ndtt {

ad::Var beta_var(ad::Tape& tape, ad::Tensor* raw) {
  ad::Var b = tape.leaf(raw);
  return tape.add_const(tape.mul(b, b), 1.0);
}

ad::Var tau_var(ad::Tape& tape, ad::Tensor* raw) { return tape.softplus1(tape.leaf(raw)); }

ad::Var pool(ad::Tape& tape, const std::vector<ad::Var>& xs, ad::Var beta, int dim) {
  if (xs.empty()) return tape.zeros(dim);
  if (xs.size() == 1) return xs[0];
  std::vector<ad::Var> powed;
  powed.reserve(xs.size());
  for (ad::Var x : xs) powed.push_back(tape.signed_pow(x, beta));
  return tape.signed_root(tape.add_many(powed), beta);
}

ad::Var cell_value_at(ad::Tape& tape, const CellBlock& block, double t, Mode mode) {
  if (t < block.start_time)
    throw Error(ErrorKind::Internal, "cell queried before its start time");
  if (block.dim == 0) return tape.zeros(0);
  if (mode == Mode::Discrete || t == block.start_time) return block.c_start;
  ad::Var decay = tape.exp(tape.scale(block.delta, -(t - block.start_time)));
  return tape.add(block.c_bar, tape.mul(tape.sub(block.c_start, block.c_bar), decay));
}

Evaluator::Evaluator(const Program& prog, const engine::DatabaseState& db, ad::Tape& tape,
                     ParameterStore& params, const CellMap& cells, double t, Mode mode)
    : prog_(prog), db_(db), tape_(tape), params_(params), cells_(cells), t_(t), mode_(mode) {}

ad::Var Evaluator::beta_for(int rule_index, const Binding& head_binding) {
  Atom name = substitute(prog_.layouts[static_cast<size_t>(rule_index)].beta_name, head_binding);
  std::string key = "beta|" + name.str();
  auto it = scalar_cache_.find(key);
  if (it != scalar_cache_.end()) return it->second;
  ad::Var v = beta_var(tape_, &params_.get_or_init(name, 1, 1, ParamRole::BetaRaw));
  scalar_cache_.emplace(key, v);
  return v;
}

ad::Var Evaluator::tau_for(const std::string& functor) {
  Atom name = prog_.tau_name(functor);
  std::string key = "tau|" + name.str();
  auto it = scalar_cache_.find(key);
  if (it != scalar_cache_.end()) return it->second;
  ad::Var v = tau_var(tape_, &params_.get_or_init(name, 1, 1, ParamRole::TauRaw));
  scalar_cache_.emplace(key, v);
  return v;
}

ad::Var Evaluator::rule_preactivation(int rule_index, const Binding& binding,
                                      const std::vector<const Atom*>& slot_atoms) {
  const RuleLayout& lay = prog_.layouts[static_cast<size_t>(rule_index)];
  int rows = lay.rows(mode_);

  auto slot_input = [&](size_t k) -> ad::Var {
    const Atom& a = *slot_atoms[k - 1];
    int cols = lay.slots[k].cols;
    const Result& r = embed(a);
    if (!r.fact) return tape_.zeros(cols);  // exogenous trigger outside the database
    return r.embedding;
  };

  if (lay.full_name) {
    Atom gname = substitute(*lay.full_name, binding);
    if (is_zero_name(gname)) return tape_.zeros(rows);
    std::vector<ad::Var> parts{tape_.constant(1.0)};
    for (size_t k = 1; k < lay.slots.size(); ++k)
      if (lay.slots[k].cols > 0) parts.push_back(slot_input(k));
    ad::Tensor& W = params_.get_or_init(gname, rows, lay.concat_cols, ParamRole::Matrix);
    return tape_.matvec(&W, tape_.concat(parts));
  }

  std::vector<ad::Var> parts;
  Atom bias_name = substitute(lay.slots[0].name, binding);
  if (!is_zero_name(bias_name))
    parts.push_back(tape_.leaf(&params_.get_or_init(bias_name, rows, 1, ParamRole::Bias)));
  for (size_t k = 1; k < lay.slots.size(); ++k) {
    if (lay.slots[k].cols == 0) continue;
    Atom name = substitute(lay.slots[k].name, binding);
    if (is_zero_name(name)) continue;
    ad::Tensor& W = params_.get_or_init(name, rows, lay.slots[k].cols, ParamRole::Matrix);
    parts.push_back(tape_.matvec(&W, slot_input(k)));
  }
  return parts.empty() ? tape_.zeros(rows) : tape_.add_many(parts);
}

const Evaluator::Result& Evaluator::embed(const Atom& h) {
  auto it = cache_.find(h);
  if (it != cache_.end()) return it->second;

  const engine::FactInfo* fi = db_.fact(h);
  if (fi == nullptr) return cache_.emplace(h, Result{}).first->second;

  Result res;
  res.fact = true;
  int d = prog_.dim(h.functor);
  int dp = prog_.dim_plus(h.functor);
  if (dp == 0) {
    res.embedding = tape_.zeros(0);
    return cache_.emplace(h, std::move(res)).first->second;
  }

  std::vector<ad::Var> parts;
  auto cit = cells_.find(h);
  if (cit != cells_.end()) parts.push_back(cell_value_at(tape_, cit->second, t_, mode_));
  for (const auto& [ri, proofs] : fi->proofs) {
    std::vector<ad::Var> inst;
    inst.reserve(proofs.size());
    for (const engine::Proof& pr : proofs) {
      std::vector<const Atom*> slots;
      slots.reserve(pr.body.size());
      for (const Atom& g : pr.body) slots.push_back(&g);
      inst.push_back(rule_preactivation(ri, pr.binding, slots));
    }
    parts.push_back(pool(tape_, inst, beta_for(ri, proofs.front().binding), dp));
  }
  ad::Var total = parts.empty() ? tape_.zeros(dp) : tape_.add_many(parts);
  res.embedding = d > 0 ? tape_.tanh(tape_.slice(total, 0, d)) : tape_.zeros(0);
  if (prog_.is_event(h.functor)) {
    res.preact = tape_.slice(total, dp - 1, 1);
    res.intensity = mode_ == Mode::Continuous
                        ? tape_.softplus_scaled(res.preact, tau_for(h.functor))
                        : tape_.exp(res.preact);
  }
  return cache_.emplace(h, std::move(res)).first->second;
}

ad::Var Evaluator::intensity(const Atom& event_fact) {
  const Result& r = embed(event_fact);
  if (!r.fact || !prog_.is_event(event_fact.functor))
    throw Error(ErrorKind::DataMismatch,
                "event " + event_fact.str() + " is not possible at time " + std::to_string(t_));
  return r.intensity;
}

std::map<Atom, ad::Var> Evaluator::intensities(const std::vector<Atom>* subset) {
  std::map<Atom, ad::Var> out;
  if (subset) {
    for (const Atom& e : *subset) out.emplace(e, intensity(e));
    return out;
  }
  for (const Atom& e : db_.possible_events()) out.emplace(e, intensity(e));
  return out;
}

ad::Var Evaluator::total_intensity(int downsample, Rng& rng) {
  std::vector<Atom> events = db_.possible_events();
  if (events.empty()) return tape_.constant(0.0);
  std::vector<ad::Var> terms;
  if (downsample > 0) {
    terms.reserve(static_cast<size_t>(downsample));
    for (int k = 0; k < downsample; ++k)
      terms.push_back(intensity(events[rng.below(events.size())]));
    return tape_.scale(tape_.add_many(terms),
                       static_cast<double>(events.size()) / static_cast<double>(downsample));
  }
  terms.reserve(events.size());
  for (const Atom& e : events) terms.push_back(intensity(e));
  return tape_.add_many(terms);
}

SequenceRunner::SequenceRunner(const Program& prog, ParameterStore& params, Mode mode,
                               const EvalOptions& opts, bool memo)
    : prog_(prog), params_(params), mode_(mode), opts_(opts), memo_(memo), db_(prog, memo) {
  db_.recompute();
}

void SequenceRunner::reset() {
  tape_.clear();
  cells_.clear();
  db_ = engine::init_state(prog_, memo_);
  now_ = 0;
}

Evaluator SequenceRunner::at(double t) {
  if (t < now_) throw Error(ErrorKind::Internal, "evaluation before the current time");
  return Evaluator(prog_, db_, tape_, params_, cells_, t, mode_);
}

void SequenceRunner::apply_events(double s, const std::vector<Atom>& events) {
  if (s < now_) throw Error(ErrorKind::Internal, "events must be applied in time order");
  // (1) all embeddings and pre-activations are taken against the pre-update
  // state at time s; (2) dock; (3) cell updates; (4) fixpoint
  Evaluator ctx = at(s);
  std::vector<engine::UpdateMatch> matches = engine::match_updates(prog_, db_, events);

  std::set<Atom> dock_now;
  for (const auto& m : matches)
    if (m.remove) dock_now.insert(m.head);
  std::map<Atom, std::map<int, std::vector<const engine::UpdateMatch*>>> by_head;
  for (const auto& m : matches)
    if (!m.remove) by_head[m.head][m.rule_index].push_back(&m);

  CellMap new_blocks;
  for (const auto& [head, by_rule] : by_head) {
    int dp = prog_.dim_plus(head.functor);
    CellBlock nb;
    nb.start_time = s;
    nb.dim = dp;
    if (dp == 0) {
      new_blocks.emplace(head, nb);
      continue;
    }
    auto old_it = cells_.find(head);
    bool fresh = dock_now.count(head) || old_it == cells_.end();
    ad::Var c_s = fresh ? tape_.zeros(dp) : cell_value_at(tape_, old_it->second, s, mode_);

    auto match_slots = [&](const engine::UpdateMatch& m) {
      std::vector<const Atom*> slots;
      slots.reserve(1 + m.body.size());
      slots.push_back(&m.trigger);
      for (const Atom& g : m.body) slots.push_back(&g);
      return slots;
    };

    if (mode_ == Mode::Discrete) {
      std::vector<ad::Var> rule_terms;
      for (const auto& [ri, ms] : by_rule) {
        std::vector<ad::Var> upds;
        for (const engine::UpdateMatch* m : ms) {
          ad::Var pre = ctx.rule_preactivation(ri, m->binding, match_slots(*m));
          ad::Var f = tape_.sigmoid(tape_.slice(pre, 0, dp));
          ad::Var i = tape_.sigmoid(tape_.slice(pre, dp, dp));
          ad::Var z = tape_.sigmoid(tape_.slice(pre, 2 * dp, dp));
          upds.push_back(tape_.add(tape_.mul(tape_.add_const(f, -1.0), c_s),
                                   tape_.mul(i, tape_.add_const(tape_.scale(z, 2.0), -1.0))));
        }
        rule_terms.push_back(pool(tape_, upds, ctx.beta_for(ri, ms.front()->binding), dp));
      }
      nb.c_start = tape_.add(c_s, tape_.add_many(rule_terms));
      new_blocks.emplace(head, nb);
      continue;
    }

    // continuous-time update
    ad::Var cbar_prev = fresh ? tape_.zeros(dp) : old_it->second.c_bar;
    struct PerMatch {
      ad::Var u_start, u_bar, dprop;
    };
    struct PerRule {
      ad::Var beta;
      std::vector<PerMatch> ms;
    };
    std::vector<PerRule> rules;
    std::vector<ad::Var> start_terms, bar_terms;
    for (const auto& [ri, ms] : by_rule) {
      PerRule pr;
      pr.beta = ctx.beta_for(ri, ms.front()->binding);
      for (const engine::UpdateMatch* m : ms) {
        ad::Var pre = ctx.rule_preactivation(ri, m->binding, match_slots(*m));
        auto chunk = [&](int j) { return tape_.slice(pre, j * dp, dp); };
        ad::Var fs = tape_.sigmoid(chunk(0));
        ad::Var is = tape_.sigmoid(chunk(1));
        ad::Var zs = tape_.sigmoid(chunk(2));
        ad::Var fb = tape_.sigmoid(chunk(3));
        ad::Var ib = tape_.sigmoid(chunk(4));
        ad::Var zb = tape_.sigmoid(chunk(5));
        PerMatch pm;
        pm.u_start = tape_.add(tape_.mul(tape_.add_const(fs, -1.0), c_s),
                               tape_.mul(is, tape_.add_const(tape_.scale(zs, 2.0), -1.0)));
        pm.u_bar = tape_.add(tape_.mul(tape_.add_const(fb, -1.0), cbar_prev),
                             tape_.mul(ib, tape_.add_const(tape_.scale(zb, 2.0), -1.0)));
        // the sigma that would produce d is replaced by softplus_1 on the raw slice
        pm.dprop = tape_.softplus1(chunk(6));
        pr.ms.push_back(pm);
      }
      std::vector<ad::Var> us, ub;
      for (const PerMatch& pm : pr.ms) us.push_back(pm.u_start), ub.push_back(pm.u_bar);
      start_terms.push_back(pool(tape_, us, pr.beta, dp));
      bar_terms.push_back(pool(tape_, ub, pr.beta, dp));
      rules.push_back(std::move(pr));
    }
    nb.c_start = tape_.add(c_s, tape_.add_many(start_terms));
    nb.c_bar = tape_.add(cbar_prev, tape_.add_many(bar_terms));

    ad::Var prev_delta = (!fresh && old_it->second.delta.ok())
                             ? old_it->second.delta
                             : tape_.constant(ad::Vec::Ones(dp));
    if (opts_.force_zero_decay) {
      nb.delta = tape_.zeros(dp);
    } else {
      // decay = weighted harmonic mean of the proposed rates; a match's
      // weight is the pooled update magnitude attributed to it, smoothed by
      // |c_bar - c_start|. Cells with all-zero weight keep the previous rate
      // (it is irrelevant there: the trajectory is flat).
      ad::Var smooth = tape_.abs(tape_.sub(nb.c_bar, nb.c_start));
      size_t total_matches = 0;
      for (const PerRule& pr : rules) total_matches += pr.ms.size();
      if (total_matches == 1) {
        const PerMatch& pm = rules.front().ms.front();
        ad::Vec mask = tape_.val(
            tape_.add(tape_.add(tape_.abs(pm.u_start), tape_.abs(pm.u_bar)), smooth));
        nb.delta = tape_.where_pos(mask, pm.dprop, prev_delta);
      } else {
        ad::Var ones = tape_.constant(ad::Vec::Ones(dp));
        auto safe_frac = [&](ad::Var num, ad::Var den) {
          // den is a sum of nonnegative terms; where it is 0 the numerator is too
          ad::Vec mask = tape_.val(den);
          ad::Var den_safe = tape_.where_pos(mask, den, ones);
          return tape_.where_pos(mask, tape_.div(num, den_safe), tape_.zeros(dp));
        };
        std::vector<ad::Var> num_terms, den_terms;
        for (const PerRule& pr : rules) {
          std::vector<ad::Var> s_abs, b_abs, s_pow, b_pow;
          for (const PerMatch& pm : pr.ms) {
            s_abs.push_back(tape_.abs(pm.u_start));
            b_abs.push_back(tape_.abs(pm.u_bar));
          }
          for (size_t k = 0; k < pr.ms.size(); ++k) {
            s_pow.push_back(tape_.signed_pow(s_abs[k], pr.beta));
            b_pow.push_back(tape_.signed_pow(b_abs[k], pr.beta));
          }
          ad::Var s_pow_sum = tape_.add_many(s_pow);
          ad::Var b_pow_sum = tape_.add_many(b_pow);
          ad::Var s_mag = pool(tape_, s_abs, pr.beta, dp);
          ad::Var b_mag = pool(tape_, b_abs, pr.beta, dp);
          for (size_t k = 0; k < pr.ms.size(); ++k) {
            ad::Var w = tape_.add(
                tape_.add(tape_.mul(s_mag, safe_frac(s_pow[k], s_pow_sum)),
                          tape_.mul(b_mag, safe_frac(b_pow[k], b_pow_sum))),
                smooth);
            num_terms.push_back(tape_.mul(w, tape_.recip(pr.ms[k].dprop)));
            den_terms.push_back(w);
          }
        }
        ad::Var den = tape_.add_many(den_terms);
        ad::Var num = tape_.add_many(num_terms);
        ad::Vec mask = tape_.val(den);
        ad::Var num_safe = tape_.where_pos(mask, num, ones);
        nb.delta = tape_.where_pos(mask, tape_.div(den, num_safe), prev_delta);
      }
    }
    new_blocks.emplace(head, nb);
  }

  engine::DatabaseState::ApplyResult res = db_.apply_symbolic(matches);
  for (const Atom& a : res.docked)
    if (!new_blocks.count(a)) cells_.erase(a);
  for (auto& [h, b] : new_blocks) cells_[h] = b;
  now_ = s;
}

void SequenceRunner::compact() {
  ad::Tape fresh;
  for (auto& [h, b] : cells_) {
    CellBlock nb;
    nb.start_time = b.start_time;
    nb.dim = b.dim;
    if (b.dim > 0) {
      nb.c_start = fresh.constant(tape_.val(b.c_start));
      if (mode_ == Mode::Continuous) {
        nb.c_bar = fresh.constant(tape_.val(b.c_bar));
        nb.delta = fresh.constant(tape_.val(b.delta));
      }
    }
    b = nb;
  }
  tape_ = std::move(fresh);
}

void SequenceRunner::maybe_compact(size_t node_limit) {
  if (tape_.num_nodes() > node_limit) compact();
}

}  // namespace ndtt
