#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "ndtt/data.hpp"
#include "ndtt/generator.hpp"
#include "ndtt/likelihood.hpp"
#include "ndtt/params.hpp"
#include "ndtt/predictor.hpp"
#include "ndtt/semantics.hpp"

using namespace ndtt;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::DataMismatch: return 3;
    case ErrorKind::NumericFailure: return 4;
    case ErrorKind::Internal: return 4;
    default: return 2;
  }
}

std::string git_describe() {
  FILE* p = popen("git describe --always --dirty 2>/dev/null", "r");
  if (!p) return "unknown";
  char buf[256] = {0};
  std::string out;
  while (fgets(buf, sizeof(buf), p)) out += buf;
  pclose(p);
  while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
  return out.empty() ? "unknown" : out;
}

Mode parse_mode(const std::string& m) {
  if (m == "continuous") return Mode::Continuous;
  if (m == "discrete") return Mode::Discrete;
  throw Error(ErrorKind::DataMismatch, "mode must be continuous or discrete");
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::DataMismatch, "cannot write " + path);
  out << content;
}

struct CheckArgs {
  std::string program;
  bool trace = false;
  std::string mode = "continuous";
};

int cmd_check(const CheckArgs& a) {
  Program prog = load_program(a.program);
  Mode mode = parse_mode(a.mode);
  std::cout << "OK: " << prog.ast.rules.size() << " rules, " << prog.ast.decls.size()
            << " declarations, program hash " << prog.hash << "\n";
  auto sigs = prog.signatures(mode);
  size_t static_scalars = 0;
  size_t lazy_families = 0;
  for (const auto& s : sigs) {
    std::cout << "  param " << s.name.str() << "  " << s.rows << "x" << s.cols << "  (" << s.role
              << (s.has_vars ? ", per grounding)" : ")") << "\n";
    if (s.has_vars)
      ++lazy_families;
    else
      static_scalars += static_cast<size_t>(s.rows) * static_cast<size_t>(s.cols);
  }
  std::cout << "parameter signatures: " << sigs.size() << " (" << static_scalars
            << " trainable scalars";
  if (lazy_families) std::cout << "; " << lazy_families << " instantiated per grounding";
  std::cout << ")\n";
  if (a.trace) {
    ParameterStore params(0);
    SequenceRunner runner(prog, params, mode);
    if (prog.mentions_init) runner.apply_events(0.0, {Atom{"init", {}}});
    std::cout << "-- facts at t=0" << (prog.mentions_init ? " (after init)" : "") << " --\n"
              << runner.db().dump();
  }
  return 0;
}

struct TrainArgs {
  std::string program, train_path, dev_path, out_dir = ".";
  std::string mode = "continuous";
  double lr = 1e-3;
  double mc_multiplier = 1.0;
  int downsample = 10;
  int patience = 5;
  int max_epochs = 50;
  int jobs = 1;
  uint64_t seed = 0;
  std::string subset_sizes;
  bool no_memo = false;
};

int cmd_train(const TrainArgs& a) {
  Program prog = load_program(a.program);
  Mode mode = parse_mode(a.mode);
  std::vector<EventSequence> train_seqs = load_dataset(a.train_path, mode);
  std::vector<EventSequence> dev_seqs =
      a.dev_path.empty() ? std::vector<EventSequence>{} : load_dataset(a.dev_path, mode);
  fs::create_directories(a.out_dir);

  TrainConfig cfg;
  cfg.lr = a.lr;
  cfg.max_epochs = a.max_epochs;
  cfg.patience = a.patience;
  cfg.mc_multiplier = a.mc_multiplier;
  cfg.downsample = a.downsample;
  cfg.seed = a.seed;
  cfg.mode = mode;
  cfg.jobs = a.jobs;
  cfg.memo = !a.no_memo;
  cfg.on_epoch = [](int epoch, double tr, double dev) {
    std::cout << "epoch " << epoch << "  train ll/event " << tr << "  dev ll/event " << dev
              << std::endl;
  };

  auto run_one = [&](const std::vector<EventSequence>& subset, const std::string& ckpt_name) {
    ParameterStore params(a.seed);
    Adam opt(a.lr);
    TrainResult res = train(prog, params, opt, subset, dev_seqs, cfg);
    save_checkpoint((fs::path(a.out_dir) / ckpt_name).string(), params, opt, prog);
    return res;
  };

  json manifest;
  manifest["command"] = "train";
  manifest["program"] = a.program;
  manifest["program_hash"] = prog.hash;
  manifest["git"] = git_describe();
  manifest["config"] = {{"lr", a.lr},
                        {"mode", a.mode},
                        {"seed", a.seed},
                        {"mc_multiplier", a.mc_multiplier},
                        {"downsample", a.downsample},
                        {"patience", a.patience},
                        {"max_epochs", a.max_epochs},
                        {"train", a.train_path},
                        {"dev", a.dev_path},
                        {"subset_sizes", a.subset_sizes}};

  if (!a.subset_sizes.empty()) {
    std::vector<size_t> sizes;
    std::stringstream ss(a.subset_sizes);
    std::string item;
    while (std::getline(ss, item, ',')) sizes.push_back(std::stoul(item));
    std::ostringstream curve;
    curve << "subset_size,epochs_run,best_epoch,best_dev_ll_per_event\n";
    for (size_t sz : sizes) {
      std::vector<EventSequence> subset(train_seqs.begin(),
                                        train_seqs.begin() + std::min(sz, train_seqs.size()));
      TrainResult res = run_one(subset, "checkpoint_" + std::to_string(sz) + ".json");
      curve << sz << ',' << res.epochs.size() << ',' << res.best_epoch << ','
            << std::setprecision(17) << res.best_dev_ll_per_event << "\n";
      std::cout << "subset " << sz << ": best dev ll/event " << res.best_dev_ll_per_event
                << std::endl;
    }
    write_file((fs::path(a.out_dir) / "learning_curve.csv").string(), curve.str());
  } else {
    TrainResult res = run_one(train_seqs, "checkpoint.json");
    std::ostringstream csv;
    csv << "epoch,train_ll_per_event,dev_ll_per_event,wallclock_s,learning_rate\n";
    for (const auto& m : res.epochs)
      csv << m.epoch << ',' << std::setprecision(17) << m.train_ll_per_event << ','
          << m.dev_ll_per_event << ',' << std::setprecision(3) << m.wallclock_s << ','
          << std::setprecision(17) << m.learning_rate << "\n";
    write_file((fs::path(a.out_dir) / "metrics.csv").string(), csv.str());
    manifest["best_epoch"] = res.best_epoch;
    manifest["best_dev_ll_per_event"] = res.best_dev_ll_per_event;
  }
  write_file((fs::path(a.out_dir) / "manifest.json").string(), manifest.dump(2) + "\n");
  return 0;
}

struct EvalArgs {
  std::string program, checkpoint, data;
  std::string mode = "continuous";
  int downsample = 0;
  double mc_multiplier = 1.0;
  uint64_t seed = 0;
  int jobs = 1;
  std::string trace_file;
};

int cmd_eval(const EvalArgs& a) {
  Program prog = load_program(a.program);
  Mode mode = parse_mode(a.mode);
  ParameterStore params(0);
  if (!a.checkpoint.empty()) {
    uint64_t hash = 0;
    load_checkpoint(a.checkpoint, params, nullptr, &hash);
    if (hash != prog.hash)
      std::cerr << "warning: checkpoint was trained on a different program (hash " << hash
                << " vs " << prog.hash << ")\n";
  }
  std::vector<EventSequence> seqs = load_dataset(a.data, mode);

  json per_seq = json::array();
  double total = 0;
  size_t events = 0;
  for (size_t i = 0; i < seqs.size(); ++i) {
    LogLikOptions lo;
    lo.downsample = a.downsample;
    lo.mc_multiplier = a.mc_multiplier;
    lo.seed = Rng(a.seed).child(i).seed();
    LogLikReport rep = loglik(prog, params, seqs[i], lo);
    per_seq.push_back({{"id", seqs[i].id},
                       {"loglik", rep.total},
                       {"events", rep.num_modeled},
                       {"event_term", rep.event_term},
                       {"integral_term", rep.integral_term}});
    total += rep.total;
    events += rep.num_modeled;
  }
  json out;
  out["sequences"] = std::move(per_seq);
  out["total_loglik"] = total;
  out["num_events"] = events;
  out["loglik_per_event"] = events ? total / static_cast<double>(events) : 0.0;
  std::cout << out.dump(2) << "\n";

  if (!a.trace_file.empty()) {
    std::ofstream trace(a.trace_file);
    for (const auto& seq : seqs) {
      SequenceRunner runner(prog, params, mode);
      std::vector<EventToken> toks = seq.tokens;
      if (prog.mentions_init && std::none_of(toks.begin(), toks.end(), [](const EventToken& t) {
            return t.atom == Atom{"init", {}};
          }))
        toks.insert(toks.begin(), EventToken{0.0, Atom{"init", {}}, true});
      size_t ti = 0;
      while (ti < toks.size()) {
        double t = toks[ti].time;
        size_t tj = ti;
        while (tj < toks.size() && toks[tj].time == t) ++tj;
        Evaluator ev = runner.at(t);
        json facts = json::object();
        for (const auto& [atom, _] : runner.db().facts()) {
          const auto& r = ev.embed(atom);
          json emb = json::array();
          const ad::Vec& v = runner.tape().val(r.embedding);
          for (Eigen::Index k = 0; k < v.size(); ++k) emb.push_back(v[k]);
          facts[atom.str()] = std::move(emb);
        }
        json inten = json::object();
        for (const Atom& e : runner.db().possible_events())
          inten[e.str()] = runner.tape().val1(ev.intensity(e));
        std::vector<Atom> events_here;
        for (size_t k = ti; k < tj; ++k) events_here.push_back(toks[k].atom);
        json line{{"sequence", seq.id},
                  {"time", t},
                  {"events", json::array()},
                  {"facts", std::move(facts)},
                  {"intensities", std::move(inten)}};
        for (const Atom& e : events_here) line["events"].push_back(e.str());
        trace << line.dump() << "\n";
        runner.apply_events(t, events_here);
        ti = tj;
      }
    }
  }
  return 0;
}

struct SampleArgs {
  std::string program, checkpoint, out_dir = ".";
  std::string mode = "continuous";
  int num_seqs = 1;
  int length = 0;
  double horizon = 0;
  uint64_t seed = 0;
  uint64_t param_seed = 12345;
  std::string exo_file;
};

int cmd_sample(const SampleArgs& a) {
  Program prog = load_program(a.program);
  Mode mode = parse_mode(a.mode);
  ParameterStore params(a.param_seed);
  if (!a.checkpoint.empty()) load_checkpoint(a.checkpoint, params, nullptr, nullptr);
  params.materialize_static(prog, mode);
  std::vector<EventToken> exo;
  if (!a.exo_file.empty())
    for (auto& tok : load_sequence(a.exo_file, Mode::Continuous).tokens) {
      tok.exogenous = true;
      exo.push_back(tok);
    }
  fs::create_directories(a.out_dir);
  for (int i = 0; i < a.num_seqs; ++i) {
    EventSequence seq;
    if (mode == Mode::Discrete) {
      if (a.length <= 0) throw Error(ErrorKind::DataMismatch, "discrete sampling needs --length");
      seq = sample_discrete(prog, params, a.length, Rng(a.seed).child(i).seed(), exo);
    } else {
      SamplerConfig cfg;
      if (a.length > 0)
        cfg.max_events = a.length;
      else if (a.horizon > 0)
        cfg.horizon = a.horizon;
      else
        throw Error(ErrorKind::DataMismatch, "set exactly one of --length or --horizon");
      cfg.seed = Rng(a.seed).child(i).seed();
      seq = sample_continuous(prog, params, cfg, exo);
    }
    char name[32];
    std::snprintf(name, sizeof(name), "seq_%04d.jsonl", i);
    save_sequence((fs::path(a.out_dir) / name).string(), seq);
  }
  std::cout << "wrote " << a.num_seqs << " sequence(s) to " << a.out_dir << "\n";
  return 0;
}

struct PredictArgs {
  std::string program, checkpoint, data;
  std::string mode = "continuous";
  std::string task = "both";  // time | type | both
  int n = 100;
  uint64_t seed = 0;
  std::string restrict_functor;
  bool restrict_true = false;
};

int cmd_predict(const PredictArgs& a) {
  Program prog = load_program(a.program);
  Mode mode = parse_mode(a.mode);
  ParameterStore params(0);
  if (!a.checkpoint.empty()) {
    uint64_t hash = 0;
    load_checkpoint(a.checkpoint, params, nullptr, &hash);
    if (hash != prog.hash) std::cerr << "warning: checkpoint/program hash mismatch\n";
  }
  params.materialize_static(prog, mode);
  std::vector<EventSequence> seqs = load_dataset(a.data, mode);

  PredictionReport rep;
  if (!a.restrict_functor.empty()) {
    // fixed candidate functor: answers "which arguments" queries
    rep = evaluate_predictions_restricted(prog, params, seqs, a.n, a.seed, a.restrict_functor);
  } else {
    rep = evaluate_predictions(prog, params, seqs, a.n, a.seed, a.restrict_true);
  }
  json per_functor = json::object();
  for (const auto& [f, st] : rep.per_functor) {
    per_functor[f] = {
        {"tokens", st.tokens},
        {"type_error_rate",
         st.tokens ? static_cast<double>(st.type_errors) / static_cast<double>(st.tokens) : 0.0},
        {"time_rmse", st.tokens ? std::sqrt(st.time_sse / static_cast<double>(st.tokens)) : 0.0}};
  }
  json out{{"num_tokens", rep.num_tokens},
           {"time_rmse", rep.time_rmse},
           {"type_error_rate", rep.type_error_rate},
           {"per_functor", std::move(per_functor)},
           {"task", a.task}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neural temporal deductive databases: check, train, eval, sample, predict"};
  app.require_subcommand(1);

  CheckArgs ca;
  auto* check = app.add_subcommand("check", "validate a program and list its parameters");
  check->add_option("program", ca.program, "program file (.ndtt)")->required();
  check->add_flag("--trace", ca.trace, "also dump the initial fact set");
  check->add_option("--mode", ca.mode, "continuous|discrete");

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "maximum-likelihood training with early stopping");
  tr->add_option("--program", ta.program)->required();
  tr->add_option("--train", ta.train_path)->required();
  tr->add_option("--dev", ta.dev_path);
  tr->add_option("--out", ta.out_dir);
  tr->add_option("--mode", ta.mode);
  tr->add_option("--lr", ta.lr);
  tr->add_option("--mc-multiplier", ta.mc_multiplier);
  tr->add_option("--downsample", ta.downsample);
  tr->add_option("--patience", ta.patience);
  tr->add_option("--max-epochs", ta.max_epochs);
  tr->add_option("--jobs", ta.jobs);
  tr->add_option("--seed", ta.seed);
  tr->add_option("--subset-sizes", ta.subset_sizes, "comma-separated training-set sizes");
  tr->add_flag("--no-memo", ta.no_memo);

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "log-likelihood of a dataset under a checkpoint");
  ev->add_option("--program", ea.program)->required();
  ev->add_option("--checkpoint", ea.checkpoint);
  ev->add_option("--data", ea.data)->required();
  ev->add_option("--mode", ea.mode);
  ev->add_option("--downsample", ea.downsample, "0 = exact total intensities");
  ev->add_option("--mc-multiplier", ea.mc_multiplier);
  ev->add_option("--seed", ea.seed);
  ev->add_option("--jobs", ea.jobs);
  ev->add_option("--trace", ea.trace_file, "write per-timestamp embeddings/intensities (JSONL)");

  SampleArgs sa;
  auto* sm = app.add_subcommand("sample", "draw event sequences from the model");
  sm->add_option("--program", sa.program)->required();
  sm->add_option("--checkpoint", sa.checkpoint);
  sm->add_option("--out", sa.out_dir);
  sm->add_option("--mode", sa.mode);
  sm->add_option("--num-seqs", sa.num_seqs);
  sm->add_option("--length", sa.length, "stop after this many events (T = t_I)");
  sm->add_option("--horizon", sa.horizon, "or stop at this time");
  sm->add_option("--seed", sa.seed);
  sm->add_option("--param-seed", sa.param_seed, "parameter init seed when no checkpoint is given");
  sm->add_option("--exo", sa.exo_file, "exogenous track to condition on (JSONL)");

  PredictArgs pa;
  auto* pr = app.add_subcommand("predict", "minimum-Bayes-risk next-event prediction");
  pr->add_option("--program", pa.program)->required();
  pr->add_option("--checkpoint", pa.checkpoint);
  pr->add_option("--data", pa.data)->required();
  pr->add_option("--mode", pa.mode);
  pr->add_option("--task", pa.task, "time|type|both (reported fields)");
  pr->add_option("--n", pa.n, "sample budget for the time integral");
  pr->add_option("--seed", pa.seed);
  pr->add_option("--restrict", pa.restrict_functor, "restrict type candidates to this functor");
  pr->add_flag("--restrict-true", pa.restrict_true,
               "restrict type candidates to the true event's functor");

  try {
    app.parse(argc, argv);
    if (*check) return cmd_check(ca);
    if (*tr) return cmd_train(ta);
    if (*ev) return cmd_eval(ea);
    if (*sm) return cmd_sample(sa);
    if (*pr) return cmd_predict(pa);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
