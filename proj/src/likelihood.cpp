#include "ndtt/likelihood.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

namespace ndtt {

namespace {

const Atom kInit{"init", {}};

std::vector<EventToken> tokens_with_init(const Program& prog, const EventSequence& seq) {
  std::vector<EventToken> toks = seq.tokens;
  if (prog.mentions_init &&
      std::none_of(toks.begin(), toks.end(), [](const EventToken& t) { return t.atom == kInit; }))
    toks.insert(toks.begin(), EventToken{0.0, kInit, true});
  return toks;
}

std::string list_possible(const engine::DatabaseState& db) {
  std::string s;
  int shown = 0;
  for (const Atom& e : db.possible_events()) {
    if (shown++ == 12) {
      s += ", ...";
      break;
    }
    s += (s.empty() ? "" : ", ") + e.str();
  }
  return s.empty() ? "(none)" : s;
}

ad::Var loglik_continuous(SequenceRunner& runner, const EventSequence& seq,
                          const LogLikOptions& opts, LogLikReport* report) {
  const Program& prog = runner.program();
  ad::Tape& tape = runner.tape();
  std::vector<EventToken> toks = tokens_with_init(prog, seq);
  size_t num_modeled = 0;
  for (const auto& t : toks)
    if (!t.exogenous) ++num_modeled;
  double horizon = seq.horizon;

  Rng rng(opts.seed);
  int mc_samples = std::max(1, static_cast<int>(std::ceil(opts.mc_multiplier *
                                                          static_cast<double>(num_modeled))));
  std::vector<double> sample_times(static_cast<size_t>(mc_samples));
  for (double& t : sample_times) t = rng.uniform(0.0, horizon);
  std::sort(sample_times.begin(), sample_times.end());

  std::vector<ad::Var> event_terms, integral_terms;
  size_t si = 0;
  size_t ti = 0;
  auto consume_samples_before = [&](double limit) {
    while (si < sample_times.size() && sample_times[si] <= limit) {
      Evaluator ev = runner.at(sample_times[si]);
      integral_terms.push_back(ev.total_intensity(opts.downsample, rng));
      ++si;
    }
  };
  while (ti < toks.size()) {
    double t = toks[ti].time;
    size_t tj = ti;
    while (tj < toks.size() && toks[tj].time == t) ++tj;
    consume_samples_before(t);  // intensities are left-continuous: samples at t see the pre-update state
    Evaluator ev = runner.at(t);
    std::vector<Atom> events;
    for (size_t k = ti; k < tj; ++k) {
      events.push_back(toks[k].atom);
      if (toks[k].exogenous) continue;
      const Evaluator::Result& r = ev.embed(toks[k].atom);
      if (!r.fact || !prog.is_event(toks[k].atom.functor))
        throw Error(ErrorKind::DataMismatch,
                    seq.id + ": observed event " + toks[k].atom.str() + " at time " +
                        std::to_string(t) + " is not possible; E(t) = " +
                        list_possible(runner.db()));
      event_terms.push_back(tape.log(r.intensity));
    }
    runner.apply_events(t, events);
    ti = tj;
  }
  consume_samples_before(horizon);

  ad::Var event_sum = event_terms.empty() ? tape.constant(0.0) : tape.add_many(event_terms);
  ad::Var integral = integral_terms.empty()
                         ? tape.constant(0.0)
                         : tape.scale(tape.add_many(integral_terms),
                                      horizon / static_cast<double>(mc_samples));
  ad::Var total = tape.sub(event_sum, integral);
  if (report) {
    report->event_term = tape.val1(event_sum);
    report->integral_term = tape.val1(integral);
    report->total = tape.val1(total);
    report->mc_samples = mc_samples;
    report->downsample = opts.downsample;
    report->num_modeled = num_modeled;
  }
  return total;
}

ad::Var loglik_discrete(SequenceRunner& runner, const EventSequence& seq,
                        const LogLikOptions& /*opts: no MC machinery in discrete time*/,
                        LogLikReport* report) {
  const Program& prog = runner.program();
  ad::Tape& tape = runner.tape();
  std::vector<EventToken> toks = tokens_with_init(prog, seq);
  int horizon = static_cast<int>(seq.horizon);

  std::vector<ad::Var> numer_terms, denom_terms;
  size_t ti = 0;
  auto apply_before = [&](double limit) {
    while (ti < toks.size() && toks[ti].time < limit) {
      double t = toks[ti].time;
      std::vector<Atom> events;
      while (ti < toks.size() && toks[ti].time == t) events.push_back(toks[ti++].atom);
      runner.apply_events(t, events);
    }
  };
  for (int step = 1; step <= horizon; ++step) {
    apply_before(step);
    // locate the modeled token of this step
    const EventToken* modeled = nullptr;
    for (size_t k = ti; k < toks.size() && toks[k].time == step; ++k)
      if (!toks[k].exogenous) modeled = &toks[k];
    if (!modeled)
      throw Error(ErrorKind::DataMismatch, seq.id + ": no modeled event at step " +
                                               std::to_string(step));
    Evaluator ev = runner.at(step);
    std::vector<Atom> possible = runner.db().possible_events();
    ad::Var own;
    bool found = false;
    std::vector<ad::Var> preacts;
    for (const Atom& e : possible) {
      ad::Var pa = ev.embed(e).preact;
      preacts.push_back(pa);
      if (e == modeled->atom) {
        own = pa;
        found = true;
      }
    }
    if (!found)
      throw Error(ErrorKind::DataMismatch,
                  seq.id + ": observed event " + modeled->atom.str() + " at step " +
                      std::to_string(step) + " is not possible; E(t) = " +
                      list_possible(runner.db()));
    numer_terms.push_back(own);
    denom_terms.push_back(tape.logsumexp(tape.concat(preacts)));
  }
  apply_before(horizon + 1);

  ad::Var numer = numer_terms.empty() ? tape.constant(0.0) : tape.add_many(numer_terms);
  ad::Var denom = denom_terms.empty() ? tape.constant(0.0) : tape.add_many(denom_terms);
  ad::Var total = tape.sub(numer, denom);
  if (report) {
    report->event_term = tape.val1(numer);
    report->integral_term = tape.val1(denom);
    report->total = tape.val1(total);
    report->mc_samples = 0;
    report->downsample = 0;
    report->num_modeled = static_cast<size_t>(horizon);
  }
  return total;
}

}  // namespace

ad::Var loglik_var(SequenceRunner& runner, const EventSequence& seq, const LogLikOptions& opts,
                   LogLikReport* report) {
  if ((seq.mode == Mode::Continuous) != (runner.mode() == Mode::Continuous))
    throw Error(ErrorKind::DataMismatch, "sequence mode does not match the runner mode");
  return seq.mode == Mode::Continuous ? loglik_continuous(runner, seq, opts, report)
                                      : loglik_discrete(runner, seq, opts, report);
}

LogLikReport loglik(const Program& prog, ParameterStore& params, const EventSequence& seq,
                    const LogLikOptions& opts) {
  SequenceRunner runner(prog, params, seq.mode, opts.eval, opts.memo);
  LogLikReport report;
  loglik_var(runner, seq, opts, &report);
  return report;
}

std::pair<double, size_t> dataset_loglik(const Program& prog, const ParameterStore& params,
                                         const std::vector<EventSequence>& seqs, Mode mode,
                                         const LogLikOptions& opts, int jobs) {
  for (const auto& s : seqs)
    if (s.mode != mode)
      throw Error(ErrorKind::DataMismatch, s.id + ": sequence mode does not match the dataset mode");
  std::vector<double> ll(seqs.size(), 0.0);
  std::vector<size_t> counts(seqs.size(), 0);
  auto score_range = [&](size_t lo, size_t hi) {
    ParameterStore local = params;  // private copy: lazy names may materialize
    for (size_t i = lo; i < hi; ++i) {
      LogLikOptions lo_opts = opts;
      lo_opts.seed = Rng(opts.seed).child(i).seed();
      LogLikReport rep = loglik(prog, local, seqs[i], lo_opts);
      ll[i] = rep.total;
      counts[i] = rep.num_modeled;
    }
  };
  int workers = std::max(1, jobs);
  if (workers == 1 || seqs.size() < 2) {
    score_range(0, seqs.size());
  } else {
    workers = std::min<int>(workers, static_cast<int>(seqs.size()));
    std::vector<std::thread> threads;
    size_t chunk = (seqs.size() + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      size_t lo = w * chunk;
      size_t hi = std::min(seqs.size(), lo + chunk);
      if (lo >= hi) break;
      threads.emplace_back(score_range, lo, hi);
    }
    for (auto& t : threads) t.join();
  }
  double total = 0;
  size_t events = 0;
  for (size_t i = 0; i < seqs.size(); ++i) {
    total += ll[i];
    events += counts[i];
  }
  return {total, events};
}

TrainResult train(const Program& prog, ParameterStore& params, Adam& opt,
                  const std::vector<EventSequence>& train_seqs,
                  const std::vector<EventSequence>& dev_seqs, const TrainConfig& cfg) {
  params.materialize_static(prog, cfg.mode);
  opt.set_lr(cfg.lr);

  TrainResult result;
  std::string best_snapshot = params.to_json(prog, 0);
  double best_dev = -std::numeric_limits<double>::infinity();
  int best_epoch = 0;

  Rng base(cfg.seed);
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    double train_ll = 0;
    size_t train_events = 0;
    for (size_t si = 0; si < train_seqs.size(); ++si) {
      SequenceRunner runner(prog, params, cfg.mode, cfg.eval, cfg.memo);
      LogLikOptions lo;
      lo.mc_multiplier = cfg.mc_multiplier;
      lo.downsample = cfg.downsample;
      lo.memo = cfg.memo;
      lo.eval = cfg.eval;
      lo.seed = base.child("train").child(static_cast<uint64_t>(epoch)).child(si).seed();
      LogLikReport rep;
      ad::Var ll;
      try {
        ll = loglik_var(runner, train_seqs[si], lo, &rep);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::NumericFailure)
          throw Error(ErrorKind::NumericFailure,
                      std::string(e.what()) + " (sequence " + train_seqs[si].id + ")");
        throw;
      }
      runner.tape().backward(ll, -1.0);  // ascend the log-likelihood
      opt.step(params);
      train_ll += rep.total;
      train_events += rep.num_modeled;
    }

    LogLikOptions dev_opts;
    dev_opts.mc_multiplier = cfg.mc_multiplier;
    dev_opts.downsample = cfg.downsample;
    dev_opts.memo = cfg.memo;
    dev_opts.eval = cfg.eval;
    dev_opts.seed = base.child("dev").seed();  // same sample times every epoch
    double dev_per_event;
    if (dev_seqs.empty()) {
      dev_per_event = train_events ? train_ll / static_cast<double>(train_events) : 0.0;
    } else {
      auto [dll, devents] = dataset_loglik(prog, params, dev_seqs, cfg.mode, dev_opts, cfg.jobs);
      dev_per_event = devents ? dll / static_cast<double>(devents) : 0.0;
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.train_ll_per_event = train_events ? train_ll / static_cast<double>(train_events) : 0.0;
    m.dev_ll_per_event = dev_per_event;
    m.wallclock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    m.learning_rate = cfg.lr;
    result.epochs.push_back(m);
    if (cfg.on_epoch) cfg.on_epoch(epoch, m.train_ll_per_event, m.dev_ll_per_event);

    if (dev_per_event > best_dev) {
      best_dev = dev_per_event;
      best_epoch = epoch;
      best_snapshot = params.to_json(prog, static_cast<uint64_t>(opt.step_count()));
    } else if (epoch - best_epoch >= cfg.patience) {
      break;
    }
  }

  // restore the best-epoch parameters (names created after the snapshot
  // re-initialize deterministically on next use)
  params = ParameterStore::from_json(best_snapshot, nullptr, nullptr);
  result.best_epoch = best_epoch;
  result.best_dev_ll_per_event = best_dev;
  return result;
}

}  // namespace ndtt
