#include "ndtt/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

#include "ndtt/parser.hpp"

namespace ndtt {

using nlohmann::json;
namespace fs = std::filesystem;

size_t EventSequence::num_modeled() const {
  size_t n = 0;
  for (const auto& t : tokens)
    if (!t.exogenous) ++n;
  return n;
}

Atom parse_ground_atom(const std::string& text) {
  Ast ast = parse_program(text + ".");
  if (ast.rules.size() != 1 || !ast.rules[0].body.empty() || !ast.decls.empty())
    throw Error(ErrorKind::DataMismatch, "not a plain atom: " + text);
  Atom a = ast.rules[0].head;
  if (!a.is_ground()) throw Error(ErrorKind::DataMismatch, "event atom is not ground: " + text);
  return a;
}

namespace {

void validate_sequence(EventSequence& seq) {
  double last = 0;
  bool have_modeled_at_last = false;
  for (const auto& tok : seq.tokens) {
    if (tok.time < 0)
      throw Error(ErrorKind::DataMismatch, seq.id + ": negative timestamp");
    if (tok.time < last)
      throw Error(ErrorKind::DataMismatch,
                  seq.id + ": out-of-order timestamp " + std::to_string(tok.time));
    if (tok.time > last) {
      last = tok.time;
      have_modeled_at_last = false;
    }
    if (!tok.exogenous) {
      if (have_modeled_at_last && seq.mode == Mode::Continuous)
        throw Error(ErrorKind::DataMismatch,
                    seq.id + ": two modeled events share time " + std::to_string(tok.time));
      have_modeled_at_last = true;
    }
  }
  if (!seq.tokens.empty() && seq.tokens.back().time > seq.horizon)
    throw Error(ErrorKind::DataMismatch, seq.id + ": token after the horizon");
  if (seq.mode == Mode::Discrete) {
    int expect = 1;
    for (const auto& tok : seq.tokens) {
      if (tok.time != std::floor(tok.time))
        throw Error(ErrorKind::DataMismatch, seq.id + ": non-integer time in discrete mode");
      if (tok.exogenous) continue;
      if (static_cast<int>(tok.time) != expect)
        throw Error(ErrorKind::DataMismatch,
                    seq.id + ": discrete mode needs exactly one modeled event per step 1..T");
      ++expect;
    }
    if (seq.horizon != static_cast<double>(expect - 1))
      throw Error(ErrorKind::DataMismatch,
                  seq.id + ": discrete horizon must equal the number of steps");
  }
}

}  // namespace

EventSequence load_sequence(const std::string& path, Mode mode) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::DataMismatch, "cannot open event file: " + path);
  EventSequence seq;
  seq.id = fs::path(path).filename().string();
  seq.mode = mode;
  bool have_horizon = false;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      throw Error(ErrorKind::DataMismatch,
                  seq.id + ":" + std::to_string(lineno) + ": bad JSON: " + e.what());
    }
    if (j.contains("horizon")) {
      seq.horizon = j.at("horizon").get<double>();
      have_horizon = true;
      continue;
    }
    EventToken tok;
    tok.time = j.at("time").get<double>();
    tok.atom = parse_ground_atom(j.at("event").get<std::string>());
    tok.exogenous = j.value("exogenous", false);
    seq.tokens.push_back(std::move(tok));
  }
  if (!have_horizon) seq.horizon = seq.tokens.empty() ? 0.0 : seq.tokens.back().time;
  validate_sequence(seq);
  return seq;
}

void save_sequence(const std::string& path, const EventSequence& seq) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::DataMismatch, "cannot write event file: " + path);
  for (const auto& tok : seq.tokens) {
    json j{{"time", tok.time}, {"event", tok.atom.str()}, {"exogenous", tok.exogenous}};
    out << j.dump() << '\n';
  }
  out << json{{"horizon", seq.horizon}}.dump() << '\n';
}

std::vector<EventSequence> load_dataset(const std::string& path, Mode mode) {
  std::vector<EventSequence> out;
  if (fs::is_directory(path)) {
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(path))
      if (entry.is_regular_file()) files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) out.push_back(load_sequence(f, mode));
  } else {
    out.push_back(load_sequence(path, mode));
  }
  return out;
}

}  // namespace ndtt
