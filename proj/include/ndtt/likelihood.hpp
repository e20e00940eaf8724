#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ndtt/data.hpp"
#include "ndtt/params.hpp"
#include "ndtt/semantics.hpp"

namespace ndtt {

struct LogLikOptions {
  double mc_multiplier = 1.0;  // MC samples per observed event for the integral
  int downsample = 10;         // |E'| for the total-intensity estimator; 0 = exact
  uint64_t seed = 0;           // drives the MC sample times and the downsampling draws
  bool memo = true;
  EvalOptions eval;
};

struct LogLikReport {
  double event_term = 0;
  double integral_term = 0;  // continuous: integral estimate; discrete: sum of log normalizers
  double total = 0;          // event_term - integral_term
  int mc_samples = 0;
  int downsample = 0;
  size_t num_modeled = 0;
};

// Differentiable log-likelihood of one sequence; the runner must be freshly
// constructed/reset and its mode must match the sequence. The `init` event is
// auto-inserted at t=0 when the program mentions it and the data does not.
ad::Var loglik_var(SequenceRunner& runner, const EventSequence& seq, const LogLikOptions& opts,
                   LogLikReport* report = nullptr);

LogLikReport loglik(const Program& prog, ParameterStore& params, const EventSequence& seq,
                    const LogLikOptions& opts);

// total log-likelihood and modeled-token count over a dataset; sequences may
// be scored in parallel (each worker reads a private copy of the store)
std::pair<double, size_t> dataset_loglik(const Program& prog, const ParameterStore& params,
                                         const std::vector<EventSequence>& seqs, Mode mode,
                                         const LogLikOptions& opts, int jobs = 1);

struct TrainConfig {
  double lr = 1e-3;
  int max_epochs = 50;
  int patience = 5;
  double mc_multiplier = 1.0;
  int downsample = 10;
  uint64_t seed = 0;
  Mode mode = Mode::Continuous;
  int jobs = 1;
  bool memo = true;
  EvalOptions eval;
  // called after each epoch with (epoch, train_ll_per_event, dev_ll_per_event)
  std::function<void(int, double, double)> on_epoch;
};

struct EpochMetrics {
  int epoch = 0;
  double train_ll_per_event = 0;
  double dev_ll_per_event = 0;
  double wallclock_s = 0;
  double learning_rate = 0;
};

struct TrainResult {
  std::vector<EpochMetrics> epochs;
  int best_epoch = 0;
  double best_dev_ll_per_event = 0;
};

// Adam, minibatch size 1, early stopping on dev log-likelihood. On return the
// store holds the best-epoch parameters.
TrainResult train(const Program& prog, ParameterStore& params, Adam& opt,
                  const std::vector<EventSequence>& train_seqs,
                  const std::vector<EventSequence>& dev_seqs, const TrainConfig& cfg);

}  // namespace ndtt
