#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "muf/ds_graph.hpp"
#include "muf/interp.hpp"
#include "muf/trace.hpp"

namespace muf {

// Sentinel for "no consumed descendant": large enough to dwarf any real
// program trace, small enough that adding one never overflows.
inline constexpr std::size_t kNeverConsumed = std::size_t{1} << 20;

// Consumption distance per introduced variable: 0 when the variable itself
// is observed or forced, otherwise one more than the nearest consumed
// descendant, kNeverConsumed when no descendant is ever consumed.
std::map<NodeId, std::size_t> m_consumed(const Trace& tr);

struct PathReport {
  // Longest downward run of unconsumed variables starting at each variable,
  // counted in variables (the start itself always contributes one; its own
  // consumption status is ignored).
  std::map<NodeId, std::size_t> per_var;
  std::size_t global_max = 0;
  // Maximum over the supplied roots, typically the variables the stream
  // state still mentions.
  std::size_t state_max = 0;
};
PathReport unseparated_paths(const Trace& tr,
                             const std::vector<NodeId>& state_roots);

// Snapshot of one particle between steps.
struct StepStats {
  std::size_t reachable = 0;       // graph nodes reachable from the state
  std::size_t state_rvs = 0;       // variables mentioned by the state
  std::size_t free_state_rvs = 0;  // of those, still unrealized
  std::size_t max_init_chain = 0;
  std::size_t max_marg_chain = 0;
  std::size_t max_state_path = 0;  // unseparated paths from state roots
  std::size_t max_path = 0;        // global unseparated path bound
  std::size_t max_unconsumed_m = 0;
};
StepStats step_stats(const Particle& pc);

// Verdict over a whole run: the smallest (m, c) that bounded every step,
// plus a growth check comparing the horizon against its midpoint. The path
// bound c only counts paths rooted in the live state; dead prefixes of the
// trace may keep long paths without costing memory.
struct HighLevelReport {
  std::size_t m_bound = 0;
  std::size_t c_bound = 0;
  bool m_growing = false;
  bool c_growing = false;
  std::vector<std::size_t> m_series;
  std::vector<std::size_t> c_series;
  bool bounded() const { return !m_growing && !c_growing; }
};
HighLevelReport check_high_level(const std::vector<StepStats>& series);

// Memory-side check: the reachable set must stay within a constant factor
// of the number of variables the state mentions.
struct LowLevelReport {
  double max_ratio = 0.0;  // max over steps of reachable / state_rvs
  std::size_t max_reachable = 0;
  bool zero_root_ok = true;  // reachable empty whenever the state holds none
};
LowLevelReport check_low_level(const std::vector<StepStats>& series);

inline bool low_level_holds(const LowLevelReport& r, double k) {
  return r.zero_root_ok && r.max_ratio <= k;
}

// Structural probe tying the graph shape back to the trace properties:
// no Initialized node may sit above a Marginalized or Realized one, the
// longest Initialized chain is covered by the consumption bound, and the
// longest Marginalized chain by path length plus finite consumption depth.
struct ChainProbe {
  bool pattern_ok = true;
  bool init_chain_ok = true;
  bool marg_chain_ok = true;
  bool ok() const { return pattern_ok && init_chain_ok && marg_chain_ok; }
};
ChainProbe chain_bounds_probe(const DSGraph& g, const Trace& tr);

std::string stats_csv_header();
std::string stats_csv_row(std::size_t step, const StepStats& s);

}  // namespace muf
