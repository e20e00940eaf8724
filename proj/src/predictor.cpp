#include "ndtt/predictor.hpp"

#include <algorithm>
#include <cmath>

namespace ndtt {

namespace {

const Atom kInit{"init", {}};

}  // namespace

std::optional<double> predict_time(SequenceRunner& runner, int n, Rng& rng) {
  double lam_star = intensity_upper_bound(runner);
  if (lam_star <= 0) return std::nullopt;  // no event will ever be possible again
  double start = runner.now();
  double sum = 0;
  for (int k = 0; k < n; ++k) {
    double t = start;
    // facts cannot change between events, so the bound holds for all t > start
    for (long guard = 0;; ++guard) {
      if (guard > 20000000)
        throw Error(ErrorKind::NumericFailure, "thinning did not accept within the guard budget");
      t += rng.exponential(lam_star);
      Evaluator ev = runner.at(t);
      Rng dummy(0);
      double lam = runner.tape().val1(ev.total_intensity(0, dummy));
      if (lam > lam_star * (1.0 + 1e-9))
        throw Error(ErrorKind::NumericFailure, "thinning bound violated in predict_time");
      if (rng.uniform() * lam_star <= lam) break;
    }
    sum += t;
    runner.maybe_compact();
  }
  return sum / n;
}

Atom predict_type(SequenceRunner& runner, double t, const std::vector<Atom>* restriction) {
  Evaluator ev = runner.at(t);
  std::vector<Atom> candidates;
  if (restriction) {
    for (const Atom& e : *restriction)
      if (runner.db().is_fact(e) && runner.program().is_event(e.functor)) candidates.push_back(e);
    if (candidates.empty())
      throw Error(ErrorKind::DataMismatch,
                  "restricted candidate set is empty or disjoint from E(t)");
  } else {
    candidates = runner.db().possible_events();
    if (candidates.empty())
      throw Error(ErrorKind::DataMismatch, "no possible events at time " + std::to_string(t));
  }
  std::sort(candidates.begin(), candidates.end());
  Atom best = candidates.front();
  double best_lam = -1;
  for (const Atom& e : candidates) {
    double lam = runner.tape().val1(ev.intensity(e));
    if (lam > best_lam) {
      best_lam = lam;
      best = e;
    }
  }
  return best;
}

PredictionReport evaluate_predictions(const Program& prog, ParameterStore& params,
                                      const std::vector<EventSequence>& seqs, int n,
                                      uint64_t seed, bool restrict_to_true_functor,
                                      const std::string* fixed_functor) {
  PredictionReport report;
  double sse = 0;
  size_t time_predictions = 0;
  size_t type_errors = 0;
  Rng base(seed);
  for (size_t si = 0; si < seqs.size(); ++si) {
    const EventSequence& seq = seqs[si];
    Rng rng = base.child(si);
    SequenceRunner runner(prog, params, seq.mode);
    std::vector<EventToken> toks = seq.tokens;
    if (prog.mentions_init && std::none_of(toks.begin(), toks.end(), [](const EventToken& t) {
          return t.atom == kInit;
        }))
      toks.insert(toks.begin(), EventToken{0.0, kInit, true});

    size_t ti = 0;
    while (ti < toks.size()) {
      double t = toks[ti].time;
      size_t tj = ti;
      while (tj < toks.size() && toks[tj].time == t) ++tj;
      for (size_t k = ti; k < tj; ++k) {
        if (toks[k].exogenous) continue;
        const Atom& truth = toks[k].atom;
        FunctorStats& fs = report.per_functor[truth.functor];
        ++fs.tokens;
        ++report.num_tokens;
        if (seq.mode == Mode::Continuous) {
          std::optional<double> tp = predict_time(runner, n, rng);
          if (tp) {
            double err = *tp - t;
            sse += err * err;
            fs.time_sse += err * err;
            ++time_predictions;
          }
        }
        std::optional<std::vector<Atom>> restriction;
        if (restrict_to_true_functor || fixed_functor) {
          const std::string& want = fixed_functor ? *fixed_functor : truth.functor;
          std::vector<Atom> cands;
          for (const Atom& e : runner.db().possible_events())
            if (e.functor == want) cands.push_back(e);
          restriction = std::move(cands);
        }
        Atom predicted = predict_type(runner, t, restriction ? &*restriction : nullptr);
        if (!(predicted == truth)) {
          ++type_errors;
          ++fs.type_errors;
        }
      }
      std::vector<Atom> events;
      for (size_t k = ti; k < tj; ++k) events.push_back(toks[k].atom);
      runner.apply_events(t, events);
      runner.compact();
      ti = tj;
    }
  }
  report.time_rmse = time_predictions ? std::sqrt(sse / static_cast<double>(time_predictions)) : 0;
  report.type_error_rate =
      report.num_tokens ? static_cast<double>(type_errors) / static_cast<double>(report.num_tokens)
                        : 0;
  return report;
}

PredictionReport evaluate_predictions_restricted(const Program& prog, ParameterStore& params,
                                                 const std::vector<EventSequence>& seqs, int n,
                                                 uint64_t seed, const std::string& functor) {
  return evaluate_predictions(prog, params, seqs, n, seed, false, &functor);
}

}  // namespace ndtt
