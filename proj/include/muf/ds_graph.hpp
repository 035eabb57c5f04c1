#pragma once

#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "muf/dist.hpp"
#include "muf/rng.hpp"
#include "muf/value.hpp"

namespace muf {

// Node life cycle: Initialized (symbolic, conditional on a parent) ->
// Marginalized (closed-form marginal, possibly linked to the one child
// currently marginalized against it) -> Realized (concrete value).
// Transitions only ever move forward.

struct InitState {
  NodeId parent;
  CDistr cd;
};
struct MargState {
  MDistr m;
  std::optional<std::pair<NodeId, CDistr>> child;
};
struct RealState {
  Value v;
};

struct Node {
  std::variant<InitState, MargState, RealState> st;
  // Parent at introduction time, kept after the state moves on; this is
  // what chain classification and debugging look at.
  std::optional<NodeId> origin_parent;
};

class DSGraph {
public:
  NodeId assume_constant(MDistr d);
  NodeId assume_conditional(NodeId parent, CDistr cd);

  // Fold the parent into `n`'s own marginal. `n` must be Initialized; the
  // parent must be Realized or Marginalized without a linked child.
  void marginalize(NodeId n);

  // If `n` is Marginalized with a realized child, absorb the child's value
  // into the marginal and drop the link. No-op otherwise.
  void force_condition(NodeId n);

  // Overwrite with a concrete value. Does not touch the parent: a parent
  // keeps its link to a realized child until force_condition visits it.
  void realize(NodeId n, Value v);

  // Draw a value for a node that is (or can be conditioned into) a free
  // marginal. Realized nodes are left alone.
  void sample_node(NodeId n, Rng& rng);

  // Realize the whole marginalized chain below `n`, then `n` itself.
  void prune(NodeId n, Rng& rng);

  // Rotate the graph so `n` becomes Marginalized with no live ancestor
  // dependence (the grafting walk of delayed sampling).
  void graft(NodeId n, Rng& rng);

  // Concrete value of `n`, sampling if needed.
  Value value_of(NodeId n, Rng& rng);

  // Condition `n` on observed data: graft, take the density of the data
  // under the freed marginal (the importance weight factor), realize.
  double observe_node(NodeId n, const Value& obs, Rng& rng);

  const Node& node(NodeId n) const { return nodes_.at(n); }
  size_t size() const { return nodes_.size(); }

  bool is_initialized(NodeId n) const;
  bool is_marginalized(NodeId n) const;
  bool is_realized(NodeId n) const;

  // Marginal family the node would have once marginalized, if that is
  // statically evident (used by the conjugacy test at assume time).
  enum class Family { Gaussian, Beta, Other };
  Family family(NodeId n) const;

  // Nodes reachable from the roots: an Initialized node links to its
  // parent, a Marginalized node to its linked child.
  std::set<NodeId> reachable(const std::vector<NodeId>& roots) const;

  struct ChainProfile {
    size_t max_init_chain = 0;  // edges between consecutive Initialized nodes
    size_t max_marg_chain = 0;  // edges between consecutive Marginalized nodes
  };
  ChainProfile chain_profile() const;

  // Stable text form for equality checks in tests.
  std::string dump() const;

private:
  std::vector<Node> nodes_;
  Node& mut(NodeId n) { return nodes_.at(n); }
};

}  // namespace muf
