#include "ndtt/generator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ndtt {

namespace {

double stable_softplus_scaled(double x, double tau) {
  double u = x / tau;
  if (u > 30.0) return x;
  if (u < -30.0) return tau * std::exp(u);
  return tau * std::log1p(std::exp(u));
}

double scalar_softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

const Atom kInit{"init", {}};

std::vector<EventToken> exo_with_init(const Program& prog, std::vector<EventToken> exo) {
  std::sort(exo.begin(), exo.end(),
            [](const EventToken& a, const EventToken& b) { return a.time < b.time; });
  if (prog.mentions_init &&
      std::none_of(exo.begin(), exo.end(), [](const EventToken& t) { return t.atom == kInit; }))
    exo.insert(exo.begin(), EventToken{0.0, kInit, true});
  for (auto& t : exo) t.exogenous = true;
  return exo;
}

}  // namespace

double intensity_upper_bound(SequenceRunner& runner) {
  const Program& prog = runner.program();
  ParameterStore& params = runner.params();
  ad::Tape& tape = runner.tape();
  double total = 0;
  for (const Atom& e : runner.db().possible_events()) {
    int dp = prog.dim_plus(e.functor);
    int last = dp - 1;
    double pre_bound = 0;
    auto cit = runner.cells().find(e);
    if (cit != runner.cells().end() && cit->second.dim > 0) {
      // the drift is monotone per cell, so the trajectory stays between the
      // start value and the asymptote
      double cs = std::fabs(tape.val(cit->second.c_start)[last]);
      double cb = runner.mode() == Mode::Continuous && cit->second.c_bar.ok()
                      ? std::fabs(tape.val(cit->second.c_bar)[last])
                      : cs;
      pre_bound += std::max(cs, cb);
    }
    const engine::FactInfo* fi = runner.db().fact(e);
    for (const auto& [ri, proofs] : fi->proofs) {
      const RuleLayout& lay = prog.layouts[static_cast<size_t>(ri)];
      int rows = lay.rows(runner.mode());
      ad::Tensor& braw =
          params.get_or_init(substitute(lay.beta_name, proofs.front().binding), 1, 1,
                             ParamRole::BetaRaw);
      double beta = 1.0 + braw.value(0, 0) * braw.value(0, 0);
      // per instantiation: |bias row| + l1 norm of each slot's last row,
      // since condition embeddings are tanh-bounded; pooled over m
      double sum_pow = 0;
      for (const engine::Proof& pr : proofs) {
        double b_inst = 0;
        if (lay.full_name) {
          Atom gname = substitute(*lay.full_name, pr.binding);
          if (!is_zero_name(gname)) {
            ad::Tensor& W = params.get_or_init(gname, rows, lay.concat_cols, ParamRole::Matrix);
            b_inst = W.value.row(last).cwiseAbs().sum();
          }
        } else {
          Atom bias_name = substitute(lay.slots[0].name, pr.binding);
          if (!is_zero_name(bias_name)) {
            ad::Tensor& b = params.get_or_init(bias_name, rows, 1, ParamRole::Bias);
            b_inst += std::fabs(b.value(last, 0));
          }
          for (size_t k = 1; k < lay.slots.size(); ++k) {
            if (lay.slots[k].cols == 0) continue;
            Atom name = substitute(lay.slots[k].name, pr.binding);
            if (is_zero_name(name)) continue;
            ad::Tensor& W = params.get_or_init(name, rows, lay.slots[k].cols, ParamRole::Matrix);
            b_inst += W.value.row(last).cwiseAbs().sum();
          }
        }
        sum_pow += std::pow(b_inst, beta);
      }
      pre_bound += std::pow(sum_pow, 1.0 / beta);
    }
    if (runner.mode() == Mode::Continuous) {
      ad::Tensor& traw = params.get_or_init(prog.tau_name(e.functor), 1, 1, ParamRole::TauRaw);
      total += stable_softplus_scaled(pre_bound, scalar_softplus(traw.value(0, 0)));
    } else {
      total += std::exp(pre_bound);
    }
  }
  return total;
}

EventSequence sample_continuous(const Program& prog, ParameterStore& params,
                                const SamplerConfig& cfg,
                                const std::vector<EventToken>& exogenous) {
  if (cfg.max_events.has_value() == cfg.horizon.has_value())
    throw Error(ErrorKind::DataMismatch, "exactly one of max_events/horizon must be set");

  SequenceRunner runner(prog, params, Mode::Continuous, cfg.eval, cfg.memo);
  Rng rng(cfg.seed);
  std::vector<EventToken> exo = exo_with_init(prog, exogenous);

  EventSequence out;
  out.mode = Mode::Continuous;
  double t = 0;
  size_t xi = 0;
  int accepted = 0;
  double last_event_time = 0;

  auto apply_exo_group = [&]() {
    double s = exo[xi].time;
    std::vector<Atom> atoms;
    while (xi < exo.size() && exo[xi].time == s) {
      out.tokens.push_back(exo[xi]);
      atoms.push_back(exo[xi].atom);
      ++xi;
    }
    runner.apply_events(s, atoms);
    runner.compact();
    t = s;
  };

  while (true) {
    double lam_star = intensity_upper_bound(runner);
    double next_exo = xi < exo.size() ? exo[xi].time : std::numeric_limits<double>::infinity();
    if (cfg.horizon && next_exo > *cfg.horizon) next_exo = std::numeric_limits<double>::infinity();
    if (lam_star <= 0) {
      if (std::isinf(next_exo)) break;
      apply_exo_group();
      continue;
    }
    double cand = t + rng.exponential(lam_star);
    if (cand >= next_exo) {
      // the bound is only valid until the next state change; redraw after it
      apply_exo_group();
      continue;
    }
    if (cfg.horizon && cand > *cfg.horizon) break;
    t = cand;
    Evaluator ev = runner.at(t);
    std::map<Atom, ad::Var> inten = ev.intensities();
    double lam = 0;
    for (const auto& [_, v] : inten) lam += runner.tape().val1(v);
    if (lam > lam_star * (1.0 + 1e-9))
      throw Error(ErrorKind::NumericFailure,
                  "thinning bound violated: lambda(t) = " + std::to_string(lam) + " > " +
                      std::to_string(lam_star));
    if (rng.uniform() * lam_star > lam) continue;  // rejected proposal
    double u = rng.uniform() * lam;
    Atom chosen;
    double acc = 0;
    for (const auto& [e, v] : inten) {
      acc += runner.tape().val1(v);
      chosen = e;
      if (u <= acc) break;
    }
    out.tokens.push_back(EventToken{t, chosen, false});
    runner.apply_events(t, {chosen});
    runner.compact();
    last_event_time = t;
    ++accepted;
    if (cfg.max_events && accepted >= *cfg.max_events) break;
  }

  if (cfg.horizon) {
    out.horizon = *cfg.horizon;
  } else {
    out.horizon = accepted > 0 ? last_event_time : t;
    // drop exogenous tail beyond T = t_I
    while (!out.tokens.empty() && out.tokens.back().time > out.horizon) out.tokens.pop_back();
  }
  return out;
}

EventSequence sample_discrete(const Program& prog, ParameterStore& params, int steps,
                              uint64_t seed, const std::vector<EventToken>& exogenous) {
  SequenceRunner runner(prog, params, Mode::Discrete, {}, true);
  Rng rng(seed);
  std::vector<EventToken> pending = exo_with_init(prog, exogenous);
  size_t xi = 0;

  EventSequence out;
  out.mode = Mode::Discrete;
  out.horizon = steps;
  std::vector<EventToken> applied_queue;

  auto apply_before = [&](double limit) {
    // merge the drawn tokens and the exogenous track in time order
    std::vector<EventToken> due;
    for (const EventToken& tok : applied_queue)
      if (tok.time < limit) due.push_back(tok);
    applied_queue.erase(
        std::remove_if(applied_queue.begin(), applied_queue.end(),
                       [&](const EventToken& tok) { return tok.time < limit; }),
        applied_queue.end());
    while (xi < pending.size() && pending[xi].time < limit) due.push_back(pending[xi++]);
    std::sort(due.begin(), due.end(),
              [](const EventToken& a, const EventToken& b) { return a.time < b.time; });
    size_t i = 0;
    while (i < due.size()) {
      double s = due[i].time;
      std::vector<Atom> atoms;
      while (i < due.size() && due[i].time == s) atoms.push_back(due[i++].atom);
      runner.apply_events(s, atoms);
    }
    runner.compact();
  };

  for (int step = 1; step <= steps; ++step) {
    apply_before(step);
    Evaluator ev = runner.at(step);
    std::vector<Atom> possible = runner.db().possible_events();
    if (possible.empty())
      throw Error(ErrorKind::DataMismatch,
                  "empty E(t) at step " + std::to_string(step) +
                      " (supply a `none` event to make every step possible)");
    // normalized exp weights, computed stably
    std::vector<double> pre(possible.size());
    double mx = -std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < possible.size(); ++k) {
      pre[k] = runner.tape().val1(ev.embed(possible[k]).preact);
      mx = std::max(mx, pre[k]);
    }
    double z = 0;
    for (double& p : pre) {
      p = std::exp(p - mx);
      z += p;
    }
    double u = rng.uniform() * z;
    size_t pick = 0;
    double acc = 0;
    for (size_t k = 0; k < possible.size(); ++k) {
      acc += pre[k];
      pick = k;
      if (u <= acc) break;
    }
    EventToken tok{static_cast<double>(step), possible[pick], false};
    out.tokens.push_back(tok);
    applied_queue.push_back(tok);
  }
  // interleave exogenous tokens into the output for completeness
  for (const EventToken& tok : pending)
    if (tok.time <= out.horizon) out.tokens.push_back(tok);
  std::stable_sort(out.tokens.begin(), out.tokens.end(),
                   [](const EventToken& a, const EventToken& b) { return a.time < b.time; });
  return out;
}

}  // namespace ndtt
