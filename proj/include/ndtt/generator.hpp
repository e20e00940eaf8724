#pragma once

#include <optional>

#include "ndtt/data.hpp"
#include "ndtt/likelihood.hpp"
#include "ndtt/semantics.hpp"

namespace ndtt {

struct SamplerConfig {
  std::optional<int> max_events;    // stop after this many modeled events (T = t_I)
  std::optional<double> horizon;    // or stop at this time; exactly one must be set
  uint64_t seed = 0;
  EvalOptions eval;
  bool memo = true;
};

// Sound upper bound on the total intensity from the current state onward
// (valid until the fact set or any cell changes): per event, softplus_tau of
// the cell-trajectory bound plus per-rule M^{1/beta} * (|bias row| + sum of
// absolute row weights), using that embeddings are tanh-bounded.
double intensity_upper_bound(SequenceRunner& runner);

// Thinning. An optional exogenous track is merged into the simulation; its
// tokens are conditioned on but not counted against max_events.
EventSequence sample_continuous(const Program& prog, ParameterStore& params,
                                const SamplerConfig& cfg,
                                const std::vector<EventToken>& exogenous = {});

// One categorical draw per step from the normalized event distribution.
EventSequence sample_discrete(const Program& prog, ParameterStore& params, int steps,
                              uint64_t seed, const std::vector<EventToken>& exogenous = {});

}  // namespace ndtt
