#pragma once

#include <map>
#include <string>
#include <vector>

#include "ndtt/engine.hpp"
#include "ndtt/params.hpp"
#include "ndtt/rng.hpp"
#include "ndtt/tape.hpp"

namespace ndtt {

// Per-atom memory. Continuous mode stores the exponential-drift trajectory
// (start value, asymptote, decay rate, all from start_time); discrete mode
// stores the cell vector in c_start. dim is D_h plus the extra intensity cell
// when the atom is an event.
struct CellBlock {
  double start_time = 0;
  int dim = 0;
  ad::Var c_start, c_bar, delta;
};

struct EvalOptions {
  // test hook: pins every decay rate to 0 so continuous cells stop drifting
  // (used by the discrete/continuous equivalence check)
  bool force_zero_decay = false;
};

using CellMap = std::map<Atom, CellBlock>;

// beta = 1 + raw^2 >= 1
ad::Var beta_var(ad::Tape& tape, ad::Tensor* raw);
// tau = softplus1(raw) > 0
ad::Var tau_var(ad::Tape& tape, ad::Tensor* raw);

// v^{-1}(sum_m v(x_m)) with v = signed_pow(., beta); pooling nothing gives 0,
// pooling one vector returns it unchanged.
ad::Var pool(ad::Tape& tape, const std::vector<ad::Var>& xs, ad::Var beta, int dim);

// cell trajectory value; throws when t < block.start_time
ad::Var cell_value_at(ad::Tape& tape, const CellBlock& block, double t, Mode mode);

// Embeddings and intensities of facts against one database state at one time.
// Results are cached per atom; the object is invalidated by any change to the
// underlying state, cells or tape.
class Evaluator {
public:
  Evaluator(const Program& prog, const engine::DatabaseState& db, ad::Tape& tape,
            ParameterStore& params, const CellMap& cells, double t, Mode mode);

  struct Result {
    bool fact = false;
    ad::Var embedding;  // D_h coordinates in (-1,1); 0-dim for undeclared functors
    ad::Var preact;     // events only: the extra row before the activation
    ad::Var intensity;  // events only: softplus_tau (continuous) or exp (discrete)
  };

  // null result (fact == false) iff h is not a fact
  const Result& embed(const Atom& h);

  ad::Var intensity(const Atom& event_fact);
  std::map<Atom, ad::Var> intensities(const std::vector<Atom>* subset = nullptr);

  // sum of intensities over E(t); downsample > 0 uses the unbiased
  // with-replacement estimator (|E|/|E'|) sum_{e in E'} lambda_e
  ad::Var total_intensity(int downsample, Rng& rng);

  // W_r [1; slots...] for one instantiation; slot_atoms follow the layout
  // (trigger first for update rules). Exogenous trigger atoms that are not
  // facts contribute a zero vector.
  ad::Var rule_preactivation(int rule_index, const Binding& binding,
                             const std::vector<const Atom*>& slot_atoms);

  ad::Var beta_for(int rule_index, const Binding& head_binding);
  ad::Var tau_for(const std::string& event_functor);

  double time() const { return t_; }
  const Program& program() const { return prog_; }

private:
  const Program& prog_;
  const engine::DatabaseState& db_;
  ad::Tape& tape_;
  ParameterStore& params_;
  const CellMap& cells_;
  double t_;
  Mode mode_;
  std::map<Atom, Result> cache_;
  std::map<std::string, ad::Var> scalar_cache_;
};

// Replays a sequence: owns the tape, the symbolic state and the cell map.
// apply_events runs the full update pipeline: pre-update evaluation, cell
// update math, dock/launch, fixpoint, memo flush.
class SequenceRunner {
public:
  SequenceRunner(const Program& prog, ParameterStore& params, Mode mode,
                 const EvalOptions& opts = {}, bool memo = true);

  void reset();
  double now() const { return now_; }
  Mode mode() const { return mode_; }
  const Program& program() const { return prog_; }
  ParameterStore& params() { return params_; }
  engine::DatabaseState& db() { return db_; }
  const CellMap& cells() const { return cells_; }
  ad::Tape& tape() { return tape_; }

  Evaluator at(double t);

  void apply_events(double s, const std::vector<Atom>& events);

  // forgets gradient history: snapshots cell values as constants on a fresh
  // tape (samplers and predictors only)
  void compact();
  void maybe_compact(size_t node_limit = 200000);

private:
  const Program& prog_;
  ParameterStore& params_;
  Mode mode_;
  EvalOptions opts_;
  bool memo_;
  ad::Tape tape_;
  engine::DatabaseState db_;
  CellMap cells_;
  double now_ = 0;
};

}  // namespace ndtt
