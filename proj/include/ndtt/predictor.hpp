#pragma once

#include <map>
#include <optional>

#include "ndtt/data.hpp"
#include "ndtt/generator.hpp"
#include "ndtt/semantics.hpp"

namespace ndtt {

// Expected next-event time from the runner's current state: the mean of n
// next-event times drawn by thinning from p_i(t). Returns nullopt when no
// event is possible (and none can become possible without an event).
std::optional<double> predict_time(SequenceRunner& runner, int n, Rng& rng);

// argmax_e lambda_e(t) over E(t), or over the restriction when given; ties
// break toward the canonically smallest atom
Atom predict_type(SequenceRunner& runner, double t, const std::vector<Atom>* restriction = nullptr);

struct FunctorStats {
  size_t tokens = 0;
  size_t type_errors = 0;
  double time_sse = 0;
};

struct PredictionReport {
  size_t num_tokens = 0;
  double time_rmse = 0;
  double type_error_rate = 0;
  std::map<std::string, FunctorStats> per_functor;
};

// For every modeled test token: predict its time from the strict prefix and
// its type given the true time; exogenous tokens are conditioned on but never
// predicted. When restrict_to_true_functor is set, the type argmax runs over
// candidates sharing the true event's functor. In discrete mode only the type
// task applies (times are the integer step index).
PredictionReport evaluate_predictions(const Program& prog, ParameterStore& params,
                                      const std::vector<EventSequence>& seqs, int n,
                                      uint64_t seed, bool restrict_to_true_functor = false,
                                      const std::string* fixed_functor = nullptr);

// type candidates restricted to one functor (e.g. "which Y did eve help")
PredictionReport evaluate_predictions_restricted(const Program& prog, ParameterStore& params,
                                                 const std::vector<EventSequence>& seqs, int n,
                                                 uint64_t seed, const std::string& functor);

}  // namespace ndtt
