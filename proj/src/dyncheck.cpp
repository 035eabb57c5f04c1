#include "muf/dyncheck.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace muf {

namespace {

struct TraceIndex {
  std::vector<NodeId> order;  // assume order, a child is always later
  std::map<NodeId, std::vector<NodeId>> children;
  std::set<NodeId> consumed;
};

TraceIndex index_trace(const Trace& tr) {
  TraceIndex ix;
  for (const auto& ev : tr) {
    if (const auto* a = std::get_if<AssumeEv>(&ev)) {
      ix.order.push_back(a->x);
      if (a->parent) ix.children[*a->parent].push_back(a->x);
    } else if (const auto* e = std::get_if<EvalEv>(&ev)) {
      ix.consumed.insert(e->vars.begin(), e->vars.end());
    } else if (const auto* o = std::get_if<ObsEv>(&ev)) {
      ix.consumed.insert(o->x);
    }
  }
  return ix;
}

// Longest downward run of unconsumed variables strictly below each variable.
std::map<NodeId, std::size_t> chains_below(const TraceIndex& ix) {
  std::map<NodeId, std::size_t> chain;
  for (auto it = ix.order.rbegin(); it != ix.order.rend(); ++it) {
    std::size_t best = 0;
    if (auto c = ix.children.find(*it); c != ix.children.end())
      for (NodeId y : c->second)
        if (!ix.consumed.count(y)) best = std::max(best, 1 + chain.at(y));
    chain[*it] = best;
  }
  return chain;
}

}  // namespace

std::map<NodeId, std::size_t> m_consumed(const Trace& tr) {
  TraceIndex ix = index_trace(tr);
  std::map<NodeId, std::size_t> m;
  for (auto it = ix.order.rbegin(); it != ix.order.rend(); ++it) {
    NodeId x = *it;
    if (ix.consumed.count(x)) {
      m[x] = 0;
      continue;
    }
    std::size_t best = kNeverConsumed;
    if (auto c = ix.children.find(x); c != ix.children.end())
      for (NodeId y : c->second) best = std::min(best, m.at(y));
    m[x] = best >= kNeverConsumed ? kNeverConsumed : best + 1;
  }
  return m;
}

PathReport unseparated_paths(const Trace& tr,
                             const std::vector<NodeId>& state_roots) {
  TraceIndex ix = index_trace(tr);
  auto chain = chains_below(ix);
  PathReport r;
  for (NodeId x : ix.order) {
    std::size_t len = 1 + chain.at(x);
    r.per_var[x] = len;
    r.global_max = std::max(r.global_max, len);
  }
  for (NodeId x : state_roots)
    if (auto it = r.per_var.find(x); it != r.per_var.end())
      r.state_max = std::max(r.state_max, it->second);
  return r;
}

StepStats step_stats(const Particle& pc) {
  StepStats s;
  std::vector<NodeId> refs = collect_rvs(pc.state);
  s.state_rvs = refs.size();
  s.free_state_rvs = free_rvs(pc.graph, pc.state).size();
  s.reachable = pc.graph.reachable(refs).size();
  auto prof = pc.graph.chain_profile();
  s.max_init_chain = prof.max_init_chain;
  s.max_marg_chain = prof.max_marg_chain;
  PathReport paths = unseparated_paths(pc.trace, refs);
  s.max_state_path = paths.state_max;
  s.max_path = paths.global_max;
  for (const auto& [x, mx] : m_consumed(pc.trace)) {
    std::size_t mu = mx < kNeverConsumed ? mx : paths.per_var.at(x);
    s.max_unconsumed_m = std::max(s.max_unconsumed_m, mu);
  }
  return s;
}

HighLevelReport check_high_level(const std::vector<StepStats>& series) {
  HighLevelReport r;
  r.m_series.reserve(series.size());
  r.c_series.reserve(series.size());
  for (const StepStats& s : series) {
    r.m_series.push_back(s.max_unconsumed_m);
    r.c_series.push_back(s.max_state_path);
    r.m_bound = std::max(r.m_bound, s.max_unconsumed_m);
    r.c_bound = std::max(r.c_bound, s.max_state_path);
  }
  std::size_t h = series.size();
  if (h >= 2) {
    r.m_growing = r.m_series[h - 1] > r.m_series[h / 2 - 1];
    r.c_growing = r.c_series[h - 1] > r.c_series[h / 2 - 1];
  }
  return r;
}

LowLevelReport check_low_level(const std::vector<StepStats>& series) {
  LowLevelReport r;
  for (const StepStats& s : series) {
    r.max_reachable = std::max(r.max_reachable, s.reachable);
    if (s.state_rvs == 0) {
      if (s.reachable != 0) r.zero_root_ok = false;
    } else {
      double ratio = static_cast<double>(s.reachable) /
                     static_cast<double>(s.state_rvs);
      r.max_ratio = std::max(r.max_ratio, ratio);
    }
  }
  return r;
}

ChainProbe chain_bounds_probe(const DSGraph& g, const Trace& tr) {
  ChainProbe r;
  for (NodeId n = 0; n < g.size(); ++n) {
    const auto& parent = g.node(n).origin_parent;
    if (!g.is_initialized(n) && parent && g.is_initialized(*parent))
      r.pattern_ok = false;
  }
  std::size_t max_m = 0;
  std::size_t max_finite_m = 0;
  for (const auto& [x, mx] : m_consumed(tr)) {
    max_m = std::max(max_m, mx);
    if (mx < kNeverConsumed) max_finite_m = std::max(max_finite_m, mx);
  }
  auto prof = g.chain_profile();
  PathReport paths = unseparated_paths(tr, {});
  r.init_chain_ok = prof.max_init_chain <= max_m;
  r.marg_chain_ok = prof.max_marg_chain <= paths.global_max + max_finite_m;
  return r;
}

std::string stats_csv_header() {
  return "step,reachable,max_init_chain,max_marg_chain,max_state_path,"
         "max_unconsumed_m";
}

std::string stats_csv_row(std::size_t step, const StepStats& s) {
  std::ostringstream os;
  os << step << ',' << s.reachable << ',' << s.max_init_chain << ','
     << s.max_marg_chain << ',' << s.max_state_path << ','
     << s.max_unconsumed_m;
  return os.str();
}

}  // namespace muf
