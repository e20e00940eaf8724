#pragma once

#include <map>
#include <optional>
#include <string>

#include "ndtt/ast.hpp"
#include "ndtt/program.hpp"
#include "ndtt/tape.hpp"

namespace ndtt {

enum class ParamRole { Matrix, Bias, BetaRaw, TauRaw };

// Named trainable tensors. Initialization draws from a stream derived from
// (seed, name), so values do not depend on creation order. Names that mention
// rule variables are materialized lazily at grounding time; distinct ground
// names share nothing, identical ground names share storage.
class ParameterStore {
public:
  explicit ParameterStore(uint64_t seed) : seed_(seed) {}

  uint64_t seed() const { return seed_; }

  ad::Tensor& get_or_init(const Atom& name, int rows, int cols, ParamRole role);
  ad::Tensor* find(const std::string& name);
  const std::map<std::string, ad::Tensor>& all() const { return tensors_; }
  std::map<std::string, ad::Tensor>& all_mut() { return tensors_; }

  // pre-create every variable-free signature of the program
  void materialize_static(const Program& prog, Mode mode);

  size_t scalar_count() const;  // trainable scalars
  void zero_grads();
  double grad_norm() const;

  std::string to_json(const Program& prog, uint64_t step_count,
                      const std::string& extra_json = "") const;
  static ParameterStore from_json(const std::string& text, std::string* adam_state = nullptr,
                                  uint64_t* program_hash = nullptr);

private:
  uint64_t seed_;
  std::map<std::string, ad::Tensor> tensors_;
};

// Adam with default settings, minibatch size 1. Moments are kept per
// parameter name; step() applies the update and zeroes the gradients.
class Adam {
public:
  explicit Adam(double lr = 1e-3) : lr_(lr) {}

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  int64_t step_count() const { return t_; }

  void step(ParameterStore& store);

  std::string state_json() const;
  void load_state_json(const std::string& text);

private:
  struct Moments {
    ad::Mat m, v;
  };
  double lr_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  int64_t t_ = 0;
  std::map<std::string, Moments> moments_;
};

// checkpoint = parameters + optimizer state + header; bit-exact round trip
void save_checkpoint(const std::string& path, const ParameterStore& store, const Adam& opt,
                     const Program& prog);
void load_checkpoint(const std::string& path, ParameterStore& store, Adam* opt,
                     uint64_t* program_hash = nullptr);

}  // namespace ndtt
