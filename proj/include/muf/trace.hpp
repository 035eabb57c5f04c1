#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "muf/value.hpp"

namespace muf {

// Introduction of a random variable, optionally depending on an earlier one.
struct AssumeEv {
  NodeId x;
  std::optional<NodeId> parent;
};
// A set of variables forced to concrete values at once.
struct EvalEv {
  std::vector<NodeId> vars;
};
// Conditioning of a variable on observed data.
struct ObsEv {
  NodeId x;
};

using Event = std::variant<AssumeEv, EvalEv, ObsEv>;
using Trace = std::vector<Event>;

}  // namespace muf
