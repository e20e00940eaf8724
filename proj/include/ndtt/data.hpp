#pragma once

#include <string>
#include <vector>

#include "ndtt/program.hpp"

namespace ndtt {

struct EventToken {
  double time = 0;
  Atom atom;
  bool exogenous = false;
};

struct EventSequence {
  std::string id;
  std::vector<EventToken> tokens;  // time-sorted
  double horizon = 0;
  Mode mode = Mode::Continuous;

  size_t num_modeled() const;
};

Atom parse_ground_atom(const std::string& text);

// JSON lines, one token per line:
//   {"time": 3.25, "event": "watch(u4,p49)", "exogenous": false}
// with an optional trailing {"horizon": T} record. Out-of-order timestamps
// are rejected, not sorted.
EventSequence load_sequence(const std::string& path, Mode mode);
void save_sequence(const std::string& path, const EventSequence& seq);

// a dataset is a directory of sequence files (sorted by name) or one file
std::vector<EventSequence> load_dataset(const std::string& path, Mode mode);

}  // namespace ndtt
