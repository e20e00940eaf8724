// Acceptance suite: one criterion per function, one PASS/FAIL line each.
// Exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "ndtt/engine.hpp"
#include "ndtt/generator.hpp"
#include "ndtt/likelihood.hpp"
#include "ndtt/parser.hpp"
#include "ndtt/predictor.hpp"
#include "support/gradcheck.hpp"
#include "support/naive_eval.hpp"
#include "support/stats.hpp"

using namespace ndtt;
using namespace ndtt::testing;
namespace fs = std::filesystem;

namespace {

int failures = 0;
std::vector<std::string> notes;

void report(int number, const std::string& name, bool ok, const std::string& detail,
            double seconds) {
  char line[512];
  std::snprintf(line, sizeof(line), "%s  criterion %2d  %-28s  %s  (%.1fs)",
                ok ? "PASS" : "FAIL", number, name.c_str(), detail.c_str(), seconds);
  std::cout << line << std::endl;
  if (!ok) ++failures;
}

void run(int number, const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
  auto t0 = std::chrono::steady_clock::now();
  bool ok = false;
  std::string detail;
  try {
    auto [o, d] = body();
    ok = o;
    detail = d;
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report(number, name, ok, detail, secs);
}

std::string fixture(const std::string& name) { return std::string(FIXTURES_DIR "/") + name; }
Atom ga(const std::string& text) { return parse_program(text + ".").rules[0].head; }

// ---------------------------------------------------------------- criterion 1

// scripted event streams per fixture; events need not be modeled-possible,
// they are only update triggers
std::vector<Atom> scripted_stream(const std::string& prog_name, Rng& rng, int step) {
  auto pick = [&](std::initializer_list<std::string> pool) {
    std::vector<std::string> v(pool);
    return ga(v[rng.below(v.size())]);
  };
  if (prog_name.rfind("superposition", 0) == 0)
    return {Atom{"e",
                 {Term::constant(std::to_string(1 + rng.below(4))),
                  Term::constant(std::to_string(1 + rng.below(4)))}}};
  if (prog_name == "human_activity.ndtt")
    return {pick({"help(eve,adam)", "help(adam,eve)", "harm(eve,cain)", "help(cain,eve)",
                  "harm(adam,eve)", "die(cain)", "help(eve,cain)"})};
  if (prog_name == "robocup_toy.ndtt")
    return {pick({"kickoff(a1)", "kickoff(b2)", "pass(a1,a2)", "pass(a2,a3)", "kick(a2)",
                  "steal(b1,a2)", "pass(b1,b3)", "goal(b3)", "steal(a3,b1)", "goal(a1)",
                  "kickoff(a3)", "pass(b3,b2)"})};
  if (prog_name == "iptv_toy.ndtt") {
    if (step < 6) return {Atom{"release", {Term::constant("p" + std::to_string(step + 1))}}};
    return {pick({"watch(u1,p1)", "watch(u2,p3)", "watch(u1,p2)", "watch(u3,p4)",
                  "watch(u4,p5)", "watch(u5,p6)", "watch(u2,p1)", "watch(u3,p6)"})};
  }
  if (prog_name == "cursed.ndtt") {
    // parents only link older names to newer ones, keeping proofs acyclic
    const char* names[] = {"cain", "enoch", "irad", "mehujael", "methushael", "lamech"};
    uint64_t a = rng.below(5);
    uint64_t b = a + 1 + rng.below(5 - a);
    return {Atom{"beget", {Term::constant(names[a]), Term::constant(names[b])}}};
  }
  if (prog_name == "growup.ndtt")
    return {pick({"growup(eve,female)", "growup(adam,male)", "growup(eve,male)",
                  "growup(adam,female)"})};
  if (prog_name == "two_phase.ndtt")
    return {step == 25 ? ga("switch") : ga("ping")};
  if (prog_name == "many_events.ndtt")
    return {Atom{"sig", {Term::constant(std::to_string(1 + rng.below(20)))}}};
  if (prog_name == "const_rate.ndtt") return {ga("ping")};
  if (prog_name == "gradcheck.ndtt")
    return {pick({"ev(i1)", "ev(i2)"})};
  return {};
}

std::pair<bool, std::string> criterion1() {
  const char* programs[] = {"superposition_structured_m4.ndtt",
                            "superposition_nhp_m4.ndtt",
                            "human_activity.ndtt",
                            "robocup_toy.ndtt",
                            "iptv_toy.ndtt",
                            "cursed.ndtt",
                            "growup.ndtt",
                            "two_phase.ndtt",
                            "many_events.ndtt",
                            "const_rate.ndtt",
                            "gradcheck.ndtt"};
  size_t steps_checked = 0;
  for (const char* name : programs) {
    Program p = load_program(fixture(name));
    engine::DatabaseState db = engine::init_state(p);
    std::set<Atom> naive_adrift;
    std::set<std::string> consts = program_constants(p);
    Rng rng(fnv1a64(name));
    for (int step = 0; step < 50; ++step) {
      std::vector<Atom> events = step == 0 && p.mentions_init
                                     ? std::vector<Atom>{ga("init")}
                                     : scripted_stream(name, rng, step);
      for (const Atom& e : events)
        for (const auto& t : e.args) consts.insert(t.text);

      // match sets agree
      std::set<Atom> fact_set;
      for (const auto& [a, _] : db.facts()) fact_set.insert(a);
      auto expected = naive_matches(p, fact_set, events, consts);
      auto matches = engine::match_updates(p, db, events);
      if (matches.size() != expected.size())
        return {false, std::string(name) + ": match count diverged at step " +
                           std::to_string(step)};
      for (const auto& m : matches) {
        NaiveMatch got{m.rule_index, m.remove, m.head, m.trigger, m.body};
        if (!std::count(expected.begin(), expected.end(), got))
          return {false, std::string(name) + ": match set diverged at step " +
                             std::to_string(step)};
      }

      // states agree after applying
      db.apply_symbolic(matches);
      for (const auto& m : expected)
        if (m.remove) naive_adrift.erase(m.head);
      for (const auto& m : expected)
        if (!m.remove) naive_adrift.insert(m.head);
      NaiveResult naive = naive_fixpoint(p, naive_adrift, consts);
      std::set<Atom> engine_facts;
      for (const auto& [a, _] : db.facts()) engine_facts.insert(a);
      if (engine_facts != naive.facts)
        return {false, std::string(name) + ": fact sets diverged at step " +
                           std::to_string(step)};
      for (const auto& [a, fi] : db.facts()) {
        auto nit = naive.proofs.find(a);
        size_t nrules = nit == naive.proofs.end() ? 0 : nit->second.size();
        if (fi.proofs.size() != nrules)
          return {false, std::string(name) + ": proof rules diverged on " + a.str()};
        for (const auto& [ri, proofs] : fi.proofs) {
          const auto& exp = nit->second.at(ri);
          if (proofs.size() != exp.size())
            return {false, std::string(name) + ": proof multiplicity diverged on " + a.str()};
          size_t m = 0;
          for (const auto& body : exp)
            if (proofs[m++].body != body)
              return {false, std::string(name) + ": instantiation order diverged on " + a.str()};
        }
      }
      ++steps_checked;
    }
  }
  return {true, std::to_string(steps_checked) + " replay steps, 11 programs, exact"};
}

// ---------------------------------------------------------------- criterion 2

std::pair<bool, std::string> criterion2() {
  Program p = load_program(fixture("gradcheck.ndtt"));
  ParameterStore store(12);
  store.materialize_static(p, Mode::Continuous);
  EventSequence seq;
  seq.mode = Mode::Continuous;
  seq.horizon = 4.0;
  seq.tokens = {{0.0, ga("init"), true},     {0.6, ga("ev(i1)"), false},
                {1.3, ga("ev(i2)"), false},  {2.1, ga("ev(i1)"), false},
                {2.9, ga("ev(i2)"), false},  {3.6, ga("ev(i1)"), false}};
  LogLikOptions opts;
  opts.downsample = 0;
  opts.seed = 77;  // frozen MC sample times
  auto runf = [&](bool with_grad) {
    SequenceRunner runner(p, store, Mode::Continuous);
    ad::Var ll = loglik_var(runner, seq, opts);
    double v = runner.tape().val1(ll);
    if (with_grad) runner.tape().backward(ll);
    return v;
  };
  GradCheckResult res = gradcheck(store, runf);
  std::ostringstream os;
  os << res.checked << " params, max rel err " << res.max_rel_err << " at "
     << (res.worst_param.empty() ? "-" : res.worst_param);
  return {res.max_rel_err < 1e-4, os.str()};
}

// ---------------------------------------------------------------- criterion 3

std::pair<bool, std::string> criterion3() {
  Program p = load_program(fixture("const_rate.ndtt"));
  ParameterStore store(1);
  store.materialize_static(p, Mode::Continuous);
  store.find("params(0,bias)")->value(0, 0) = 0.8;
  double lambda = std::log1p(std::exp(0.8));
  EventSequence seq;
  seq.mode = Mode::Continuous;
  seq.horizon = 3.0;
  seq.tokens = {{0.7, ga("ping"), false}, {1.9, ga("ping"), false}};
  double closed = 2 * std::log(lambda) - lambda * 3.0;

  LogLikOptions exact;
  exact.downsample = 0;
  exact.seed = 5;
  double got = loglik(p, store, seq, exact).total;
  if (std::fabs(got - closed) > 1e-9)
    return {false, "exact path differs from the closed form"};

  std::vector<double> estimates;
  for (uint64_t s = 0; s < 50; ++s) {
    LogLikOptions mc;
    mc.downsample = 10;
    mc.mc_multiplier = 1.0;
    mc.seed = 1000 + s;
    estimates.push_back(loglik(p, store, seq, mc).total);
  }
  double mean = mean_of(estimates);
  double se = estimates.size() > 1 ? stddev_of(estimates) / std::sqrt(50.0) : 0.0;
  bool ok = std::fabs(mean - closed) <= 3 * se + 1e-9;
  std::ostringstream os;
  os << "exact diff " << std::fabs(got - closed) << ", MC mean off by "
     << std::fabs(mean - closed) << " (3se = " << 3 * se << ")";
  return {ok, os.str()};
}

// ---------------------------------------------------------------- criterion 4

std::pair<bool, std::string> criterion4() {
  Program p = load_program(fixture("many_events.ndtt"));
  ParameterStore store(99);
  store.materialize_static(p, Mode::Continuous);
  SequenceRunner runner(p, store, Mode::Continuous);
  Evaluator ev = runner.at(0.0);
  Rng none(0);
  double exact = runner.tape().val1(ev.total_intensity(0, none));
  Rng rng(2024);
  int draws = 10000;
  std::vector<double> estimates;
  estimates.reserve(draws);
  for (int k = 0; k < draws; ++k)
    estimates.push_back(runner.tape().val1(ev.total_intensity(10, rng)));
  double mean = mean_of(estimates);
  double se = stddev_of(estimates) / std::sqrt(static_cast<double>(draws));
  std::ostringstream os;
  os << "|E|=20, mean off by " << std::fabs(mean - exact) << " (3se = " << 3 * se << ")";
  return {std::fabs(mean - exact) <= 3 * se, os.str()};
}

// ---------------------------------------------------------------- criterion 5

std::pair<bool, std::string> criterion5() {
  // homogeneous: gaps are Exp(lambda)
  Program p = load_program(fixture("const_rate.ndtt"));
  ParameterStore store(1);
  store.materialize_static(p, Mode::Continuous);
  double lambda = 2.0;
  store.find("params(0,bias)")->value(0, 0) = std::log(std::exp(lambda) - 1.0);
  SamplerConfig cfg;
  cfg.max_events = 5000;
  cfg.seed = 41;
  EventSequence homog = sample_continuous(p, store, cfg);
  std::vector<double> gaps;
  double prev = 0;
  for (const auto& tok : homog.tokens) {
    gaps.push_back(tok.time - prev);
    prev = tok.time;
  }
  double p_homog = ks_pvalue_exponential(gaps, lambda);

  // two-phase: time-rescaled residuals are Exp(1); the compensator is
  // computed numerically from model intensities on a grid split at the jump
  Program p2 = load_program(fixture("two_phase.ndtt"));
  ParameterStore store2(2);
  store2.materialize_static(p2, Mode::Continuous);
  store2.find("wa")->value(0, 0) = std::log(std::exp(3.0) - 1.0);
  store2.find("wb")->value(0, 0) = std::log(std::exp(0.5) - 1.0);
  double switch_time = 1200.0, horizon = 3500.0;
  SamplerConfig cfg2;
  cfg2.horizon = horizon;
  cfg2.seed = 42;
  EventSequence duo =
      sample_continuous(p2, store2, cfg2, {{switch_time, ga("switch"), true}});
  std::vector<double> times;
  for (const auto& tok : duo.tokens)
    if (!tok.exogenous) times.push_back(tok.time);
  if (times.size() < 3000) return {false, "two-phase sample unexpectedly small"};

  SequenceRunner probe(p2, store2, Mode::Continuous);
  probe.apply_events(0.0, {ga("init")});
  bool switched = false;
  double prev_t = 0;
  std::vector<double> residuals;
  Rng none(0);
  auto total_at = [&](double t) {
    Evaluator ev = probe.at(t);
    return probe.tape().val1(ev.total_intensity(0, none));
  };
  for (double t : times) {
    if (!switched && t > switch_time) {
      // split the integral at the jump
      double left = (switch_time - prev_t) * total_at(0.5 * (prev_t + switch_time));
      probe.apply_events(switch_time, {ga("switch")});
      probe.compact();
      switched = true;
      double right = (t - switch_time) * total_at(0.5 * (switch_time + t));
      residuals.push_back(left + right);
    } else {
      residuals.push_back((t - prev_t) * total_at(0.5 * (prev_t + t)));
    }
    prev_t = t;
    probe.maybe_compact(50000);
  }
  double p_rescale = ks_pvalue_exponential(residuals, 1.0);

  // gap test on the two-phase fixture within its first phase
  std::vector<double> phase1_gaps;
  prev = 0;
  for (double t : times) {
    if (t > switch_time) break;
    phase1_gaps.push_back(t - prev);
    prev = t;
  }
  double p_phase1 = ks_pvalue_exponential(phase1_gaps, 3.0);

  std::ostringstream os;
  os << "KS p: homog " << p_homog << ", two-phase gaps " << p_phase1 << ", rescaled "
     << p_rescale;
  return {p_homog > 0.01 && p_phase1 > 0.01 && p_rescale > 0.01, os.str()};
}

// ---------------------------------------------------------------- criterion 6

std::pair<bool, std::string> criterion6() {
  Program p = load_program(fixture("const_rate.ndtt"));
  ParameterStore store(1);
  store.materialize_static(p, Mode::Continuous);
  double lambda = 2.0;
  store.find("params(0,bias)")->value(0, 0) = std::log(std::exp(lambda) - 1.0);
  SequenceRunner runner(p, store, Mode::Continuous);
  Rng rng(231);
  int n = 10000;
  std::optional<double> pred = predict_time(runner, n, rng);
  if (!pred) return {false, "no prediction on a live state"};
  double se = (1.0 / lambda) / std::sqrt(static_cast<double>(n));
  if (std::fabs(*pred - 0.5) > 3 * se)
    return {false, "constant-rate time prediction off: " + std::to_string(*pred)};

  // type prediction under churn: replay sampled RoboCup games, predicting at
  // every step; the argmax must always be a currently possible event
  Program rc = load_program(fixture("robocup_toy.ndtt"));
  ParameterStore rc_store(7);
  rc_store.materialize_static(rc, Mode::Continuous);
  size_t trials = 0;
  for (uint64_t s = 0; trials < 10000; ++s) {
    SamplerConfig cfg;
    cfg.max_events = 200;
    cfg.seed = 500 + s;
    EventSequence game = sample_continuous(rc, rc_store, cfg);
    SequenceRunner replay(rc, rc_store, Mode::Continuous);
    for (const auto& tok : game.tokens) {
      if (!tok.exogenous) {
        Atom predicted = predict_type(replay, tok.time);
        if (!replay.db().is_fact(predicted))
          return {false, "predicted an impossible event: " + predicted.str()};
        bool declared = rc.is_event(predicted.functor);
        if (!declared) return {false, "predicted a non-event atom"};
        ++trials;
      }
      replay.apply_events(tok.time, {tok.atom});
      replay.compact();
    }
  }
  return {true, "time prediction within 3se; 10000 churning type predictions all possible"};
}

// ---------------------------------------------------------------- criterion 7

struct CurvePoint {
  size_t subset;
  double structured, unstructured;
  double p_perm;
};

std::pair<bool, std::string> criterion7() {
  Program structured = load_program(fixture("superposition_structured_m4.ndtt"));
  Program nhp = load_program(fixture("superposition_nhp_m4.ndtt"));

  // generate data from a seeded structured model
  ParameterStore truth(20240601);
  truth.materialize_static(structured, Mode::Continuous);
  auto draw = [&](int count, uint64_t salt) {
    std::vector<EventSequence> out;
    for (int i = 0; i < count; ++i) {
      SamplerConfig cfg;
      cfg.max_events = 21;
      cfg.seed = Rng(salt).child(i).seed();
      out.push_back(sample_continuous(structured, truth, cfg));
    }
    return out;
  };
  std::vector<EventSequence> train_seqs = draw(200, 11);
  std::vector<EventSequence> dev_seqs = draw(50, 22);
  std::vector<EventSequence> test_seqs = draw(50, 33);

  auto fit_and_score = [&](const Program& prog, size_t subset, uint64_t seed) {
    std::vector<EventSequence> sub(train_seqs.begin(), train_seqs.begin() + subset);
    ParameterStore store(seed);
    Adam opt;
    TrainConfig cfg;
    cfg.lr = 0.03;
    cfg.max_epochs = 25;
    cfg.patience = 4;
    cfg.downsample = 10;
    cfg.seed = seed;
    cfg.jobs = 2;
    train(prog, store, opt, sub, dev_seqs, cfg);
    // exact per-sequence test log-likelihoods
    std::vector<double> per_seq;
    size_t events = 0;
    for (size_t i = 0; i < test_seqs.size(); ++i) {
      LogLikOptions lo;
      lo.downsample = 0;
      lo.mc_multiplier = 4.0;
      lo.seed = Rng(4242).child(i).seed();
      LogLikReport rep = loglik(prog, store, test_seqs[i], lo);
      per_seq.push_back(rep.total);
      events += rep.num_modeled;
    }
    return std::make_pair(per_seq, events);
  };

  std::vector<CurvePoint> curve;
  bool ordered = true;
  for (size_t subset : {25u, 50u, 100u, 200u}) {
    auto [s_ll, s_events] = fit_and_score(structured, subset, 91);
    auto [n_ll, n_events] = fit_and_score(nhp, subset, 92);
    CurvePoint pt;
    pt.subset = subset;
    pt.structured = mean_of(s_ll) * s_ll.size() / static_cast<double>(s_events);
    pt.unstructured = mean_of(n_ll) * n_ll.size() / static_cast<double>(n_events);
    std::vector<double> diffs(s_ll.size());
    for (size_t i = 0; i < s_ll.size(); ++i) diffs[i] = s_ll[i] - n_ll[i];
    pt.p_perm = paired_permutation_pvalue(diffs);
    curve.push_back(pt);
    ordered = ordered && pt.structured >= pt.unstructured;
  }
  std::ostringstream os;
  for (const auto& pt : curve)
    os << pt.subset << ": " << pt.structured << " vs " << pt.unstructured << " (p="
       << pt.p_perm << ") ";
  bool small_strict = curve.front().structured > curve.front().unstructured &&
                      curve.front().p_perm < 0.05;
  return {ordered && small_strict, os.str()};
}

// ---------------------------------------------------------------- criterion 8

size_t materialized_scalar_count(const Program& p) {
  ParameterStore store(5);
  store.materialize_static(p, Mode::Continuous);
  SequenceRunner runner(p, store, Mode::Continuous);
  runner.apply_events(0.0, {ga("init")});
  Evaluator ev = runner.at(0.0);
  for (const auto& [atom, _] : runner.db().facts()) ev.embed(atom);
  // one event of an arbitrary type exercises the update-rule parameters
  std::vector<Atom> events = runner.db().possible_events();
  if (!events.empty()) runner.apply_events(1.0, {events.front()});
  Evaluator ev2 = runner.at(1.0);
  for (const auto& [atom, _] : runner.db().facts()) ev2.embed(atom);
  return store.scalar_count();
}

std::pair<bool, std::string> criterion8() {
  size_t s4 = materialized_scalar_count(load_program(fixture("superposition_structured_m4.ndtt")));
  size_t s8 = materialized_scalar_count(load_program(fixture("superposition_structured_m8.ndtt")));
  size_t n4 = materialized_scalar_count(load_program(fixture("superposition_nhp_m4.ndtt")));
  size_t n8 = materialized_scalar_count(load_program(fixture("superposition_nhp_m8.ndtt")));
  // per-type names emb(M,N): 8x1 and prob(M,N): 1x9 -> 17 scalars per type
  bool ok = s4 == s8 && (n8 - n4) == 17 * (64 - 16);
  std::ostringstream os;
  os << "structured " << s4 << " = " << s8 << "; nhp " << n4 << " -> " << n8 << " (+"
     << (n8 - n4) << ", expected +816)";
  return {ok, os.str()};
}

// ---------------------------------------------------------------- criterion 9

std::pair<bool, std::string> criterion9() {
  Program p = load_program(fixture("superposition_structured_m4.ndtt"));
  ParameterStore truth(606);
  truth.materialize_static(p, Mode::Continuous);
  std::vector<EventSequence> data;
  for (int i = 0; i < 12; ++i) {
    SamplerConfig cfg;
    cfg.max_events = 15;
    cfg.seed = Rng(7000).child(i).seed();
    data.push_back(sample_continuous(p, truth, cfg));
  }
  auto epoch_losses = [&](bool memo) {
    ParameterStore store(31337);
    Adam opt(0.02);
    std::vector<double> losses;
    for (size_t i = 0; i < data.size(); ++i) {
      SequenceRunner runner(p, store, Mode::Continuous, {}, memo);
      LogLikOptions lo;
      lo.memo = memo;
      lo.downsample = 10;
      lo.seed = Rng(88).child(i).seed();
      LogLikReport rep;
      ad::Var ll = loglik_var(runner, data[i], lo, &rep);
      runner.tape().backward(ll, -1.0);
      opt.step(store);
      losses.push_back(rep.total);
    }
    return std::make_pair(losses, store.to_json(p, 0));
  };
  auto [on, params_on] = epoch_losses(true);
  auto [off, params_off] = epoch_losses(false);
  for (size_t i = 0; i < on.size(); ++i)
    if (on[i] != off[i])
      return {false, "loss diverged at sequence " + std::to_string(i)};
  if (params_on != params_off) return {false, "parameters diverged after the epoch"};
  return {true, std::to_string(on.size()) + " per-sequence losses bit-identical"};
}

// --------------------------------------------------------------- criterion 10

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string strip_wallclock(const std::string& csv) {
  std::istringstream in(csv);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    size_t c1 = 0;
    int commas = 0;
    for (size_t i = 0; i < line.size(); ++i)
      if (line[i] == ',' && ++commas == 3) {
        c1 = i;
        break;
      }
    size_t c2 = line.rfind(',');
    out << line.substr(0, c1) << line.substr(c2) << "\n";
  }
  return out.str();
}

std::pair<bool, std::string> criterion10() {
  std::string cli = NDTT_CLI_PATH;
  fs::path work = fs::temp_directory_path() / "ndtt_accept10";
  fs::remove_all(work);
  fs::create_directories(work);
  std::string prog = fixture("superposition_structured_m4.ndtt");

  auto sh = [&](const std::string& cmd) {
    int rc = std::system((cmd + " > /dev/null 2>&1").c_str());
    return rc == 0;
  };
  for (int round = 1; round <= 2; ++round) {
    std::string dir = (work / ("r" + std::to_string(round))).string();
    fs::create_directories(dir);
    if (!sh(cli + " sample --program " + prog + " --num-seqs 3 --length 12 --seed 5 " +
            "--param-seed 606 --out " + dir + "/samples"))
      return {false, "sample command failed"};
    if (!sh(cli + " train --program " + prog + " --train " + dir + "/samples --dev " + dir +
            "/samples --seed 9 --lr 0.05 --max-epochs 2 --out " + dir + "/run"))
      return {false, "train command failed"};
    if (!sh(cli + " eval --program " + prog + " --checkpoint " + dir +
            "/run/checkpoint.json --data " + dir + "/samples --downsample 0 --seed 3 > " + dir +
            "/eval.json 2>/dev/null"))
      return {false, "eval command failed"};
  }
  for (int i = 0; i < 3; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "seq_%04d.jsonl", i);
    if (slurp((work / "r1/samples" / name).string()) !=
        slurp((work / "r2/samples" / name).string()))
      return {false, std::string("sample files differ: ") + name};
  }
  if (slurp((work / "r1/run/checkpoint.json").string()) !=
      slurp((work / "r2/run/checkpoint.json").string()))
    return {false, "checkpoints differ"};
  if (strip_wallclock(slurp((work / "r1/run/metrics.csv").string())) !=
      strip_wallclock(slurp((work / "r2/run/metrics.csv").string())))
    return {false, "metrics differ"};
  if (slurp((work / "r1/eval.json").string()) != slurp((work / "r2/eval.json").string()))
    return {false, "eval reports differ"};
  return {true, "sample/train/eval byte-identical across two runs"};
}

}  // namespace

int main() {
  run(1, "symbolic oracle equivalence", criterion1);
  run(2, "gradient correctness", criterion2);
  run(3, "closed-form likelihood", criterion3);
  run(4, "estimator unbiasedness", criterion4);
  run(5, "sampler statistics", criterion5);
  run(6, "MBR sanity", criterion6);
  run(7, "learning curves", criterion7);
  run(8, "parameter-count law", criterion8);
  run(9, "memoization transparency", criterion9);
  run(10, "determinism", criterion10);
  if (failures) {
    std::cout << failures << " criterion(s) failed" << std::endl;
    return 1;
  }
  std::cout << "all criteria passed" << std::endl;
  return 0;
}
