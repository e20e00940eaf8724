#include "ndtt/params.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "ndtt/rng.hpp"

namespace ndtt {

using nlohmann::json;

namespace {

// raw value of tau such that softplus1(raw) == 1
const double kTauRawInit = std::log(std::exp(1.0) - 1.0);

}  // namespace

ad::Tensor& ParameterStore::get_or_init(const Atom& name, int rows, int cols, ParamRole role) {
  if (!name.is_ground())
    throw Error(ErrorKind::Internal, "parameter name not ground: " + name.str());
  std::string key = name.str();
  auto it = tensors_.find(key);
  if (it != tensors_.end()) {
    if (it->second.rows() != rows || it->second.cols() != cols)
      throw Error(ErrorKind::ShapeConflict,
                  "parameter " + key + " requested as " + std::to_string(rows) + "x" +
                      std::to_string(cols) + " but stored as " + std::to_string(it->second.rows()) +
                      "x" + std::to_string(it->second.cols()));
    return it->second;
  }
  ad::Mat value(rows, cols);
  switch (role) {
    case ParamRole::BetaRaw:
      value.setZero();  // beta = 1 + raw^2 starts at 1: pure summation
      break;
    case ParamRole::TauRaw:
      value.setConstant(kTauRawInit);
      break;
    case ParamRole::Matrix:
    case ParamRole::Bias: {
      Rng rng = Rng(seed_).child(key);
      double fan_in = role == ParamRole::Bias ? 1.0 : static_cast<double>(cols);
      double a = std::sqrt(6.0 / (fan_in + static_cast<double>(rows)));
      for (int c = 0; c < cols; ++c)
        for (int r = 0; r < rows; ++r) value(r, c) = rng.uniform(-a, a);
      break;
    }
  }
  auto [nit, _] = tensors_.emplace(key, ad::Tensor(std::move(value)));
  return nit->second;
}

ad::Tensor* ParameterStore::find(const std::string& name) {
  auto it = tensors_.find(name);
  return it == tensors_.end() ? nullptr : &it->second;
}

void ParameterStore::materialize_static(const Program& prog, Mode mode) {
  for (const auto& sig : prog.signatures(mode)) {
    if (sig.has_vars) continue;
    ParamRole role = ParamRole::Matrix;
    if (sig.role == "beta")
      role = ParamRole::BetaRaw;
    else if (sig.role == "tau")
      role = ParamRole::TauRaw;
    else if (sig.role == "bias")
      role = ParamRole::Bias;
    get_or_init(sig.name, sig.rows, sig.cols, role);
  }
}

size_t ParameterStore::scalar_count() const {
  size_t n = 0;
  for (const auto& [_, t] : tensors_)
    if (!t.frozen) n += static_cast<size_t>(t.value.size());
  return n;
}

void ParameterStore::zero_grads() {
  for (auto& [_, t] : tensors_) t.grad.setZero();
}

double ParameterStore::grad_norm() const {
  double s = 0;
  for (const auto& [_, t] : tensors_) s += t.grad.squaredNorm();
  return std::sqrt(s);
}

namespace {

json mat_to_json(const ad::Mat& m) {
  json data = json::array();
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return json{{"shape", {m.rows(), m.cols()}}, {"data", std::move(data)}};
}

ad::Mat mat_from_json(const json& j) {
  int rows = j.at("shape").at(0).get<int>();
  int cols = j.at("shape").at(1).get<int>();
  ad::Mat m(rows, cols);
  const json& data = j.at("data");
  if (static_cast<int>(data.size()) != rows * cols)
    throw Error(ErrorKind::DataMismatch, "checkpoint matrix size mismatch");
  size_t k = 0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = data.at(k++).get<double>();
  return m;
}

}  // namespace

std::string ParameterStore::to_json(const Program& prog, uint64_t step_count,
                                    const std::string& extra_json) const {
  json out;
  out["format_version"] = 1;
  out["program_hash"] = prog.hash;
  out["rng_seed"] = seed_;
  out["step_count"] = step_count;
  json params = json::object();
  for (const auto& [name, t] : tensors_) params[name] = mat_to_json(t.value);
  out["params"] = std::move(params);
  if (!extra_json.empty()) out["optimizer"] = json::parse(extra_json);
  return out.dump(2);
}

ParameterStore ParameterStore::from_json(const std::string& text, std::string* adam_state,
                                         uint64_t* program_hash) {
  json in = json::parse(text);
  ParameterStore store(in.at("rng_seed").get<uint64_t>());
  if (program_hash) *program_hash = in.at("program_hash").get<uint64_t>();
  for (auto& [name, jt] : in.at("params").items()) {
    ad::Mat m = mat_from_json(jt);
    store.tensors_.emplace(name, ad::Tensor(std::move(m)));
  }
  if (adam_state) *adam_state = in.contains("optimizer") ? in["optimizer"].dump() : "";
  return store;
}

void Adam::step(ParameterStore& store) {
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& [name, tensor] : store.all_mut()) {
    if (tensor.frozen) continue;
    auto [it, fresh] = moments_.try_emplace(name);
    Moments& mo = it->second;
    if (fresh || mo.m.size() != tensor.value.size()) {
      mo.m = ad::Mat::Zero(tensor.value.rows(), tensor.value.cols());
      mo.v = ad::Mat::Zero(tensor.value.rows(), tensor.value.cols());
    }
    mo.m = beta1_ * mo.m + (1.0 - beta1_) * tensor.grad;
    mo.v = beta2_ * mo.v + (1.0 - beta2_) * tensor.grad.cwiseProduct(tensor.grad);
    ad::Mat mhat = mo.m / bc1;
    ad::Mat vhat = mo.v / bc2;
    tensor.value -= lr_ * mhat.cwiseQuotient(vhat.cwiseSqrt() + ad::Mat::Constant(vhat.rows(), vhat.cols(), eps_));
    tensor.grad.setZero();
  }
}

std::string Adam::state_json() const {
  json out;
  out["t"] = t_;
  out["lr"] = lr_;
  json ms = json::object();
  for (const auto& [name, mo] : moments_)
    ms[name] = json{{"m", mat_to_json(mo.m)}, {"v", mat_to_json(mo.v)}};
  out["moments"] = std::move(ms);
  return out.dump();
}

void Adam::load_state_json(const std::string& text) {
  if (text.empty()) return;
  json in = json::parse(text);
  t_ = in.at("t").get<int64_t>();
  lr_ = in.at("lr").get<double>();
  moments_.clear();
  for (auto& [name, j] : in.at("moments").items())
    moments_[name] = Moments{mat_from_json(j.at("m")), mat_from_json(j.at("v"))};
}

void save_checkpoint(const std::string& path, const ParameterStore& store, const Adam& opt,
                     const Program& prog) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::DataMismatch, "cannot write checkpoint: " + path);
  out << store.to_json(prog, static_cast<uint64_t>(opt.step_count()), opt.state_json());
  out << '\n';
}

void load_checkpoint(const std::string& path, ParameterStore& store, Adam* opt,
                     uint64_t* program_hash) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::DataMismatch, "cannot read checkpoint: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string adam_state;
  store = ParameterStore::from_json(ss.str(), &adam_state, program_hash);
  if (opt) opt->load_state_json(adam_state);
}

}  // namespace ndtt
