#include "muf/ds_graph.hpp"

#include <sstream>

#include "muf/source.hpp"

namespace muf {

NodeId DSGraph::assume_constant(MDistr d) {
  nodes_.push_back(Node{MargState{std::move(d), std::nullopt}, std::nullopt});
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId DSGraph::assume_conditional(NodeId parent, CDistr cd) {
  if (parent >= nodes_.size()) throw GraphError("assume_conditional: bad parent id");
  nodes_.push_back(Node{InitState{parent, std::move(cd)}, parent});
  return static_cast<NodeId>(nodes_.size() - 1);
}

void DSGraph::marginalize(NodeId n) {
  auto* init = std::get_if<InitState>(&mut(n).st);
  if (!init) throw GraphError("marginalize: node is not initialized");
  Node& p = mut(init->parent);
  if (const auto* pr = std::get_if<RealState>(&p.st)) {
    mut(n).st = MargState{cdistr_to_mdistr(init->cd, pr->v), std::nullopt};
    return;
  }
  if (auto* pm = std::get_if<MargState>(&p.st)) {
    if (pm->child)
      throw GraphError("marginalize: parent already has a marginalized child");
    MDistr marg = make_marginal(pm->m, init->cd);
    pm->child = std::make_pair(n, init->cd);
    mut(n).st = MargState{std::move(marg), std::nullopt};
    return;
  }
  throw GraphError("marginalize: parent is still initialized");
}

void DSGraph::force_condition(NodeId n) {
  auto* m = std::get_if<MargState>(&mut(n).st);
  if (!m || !m->child) return;
  const auto* child_real = std::get_if<RealState>(&node(m->child->first).st);
  if (!child_real) return;
  MDistr post = make_conditional(m->m, m->child->second, child_real->v);
  m->m = std::move(post);
  m->child.reset();
}

void DSGraph::realize(NodeId n, Value v) { mut(n).st = RealState{std::move(v)}; }

void DSGraph::sample_node(NodeId n, Rng& rng) {
  force_condition(n);
  if (std::holds_alternative<RealState>(node(n).st)) return;
  const auto* m = std::get_if<MargState>(&node(n).st);
  if (!m || m->child)
    throw GraphError("sample: node is not a free marginal");
  Value v = draw(m->m, rng);
  realize(n, std::move(v));
}

void DSGraph::prune(NodeId n, Rng& rng) {
  if (const auto* m = std::get_if<MargState>(&node(n).st); m && m->child)
    prune(m->child->first, rng);
  sample_node(n, rng);
}

void DSGraph::graft(NodeId n, Rng& rng) {
  if (const auto* m = std::get_if<MargState>(&node(n).st)) {
    if (m->child) prune(m->child->first, rng);
    return;
  }
  if (std::holds_alternative<RealState>(node(n).st)) return;
  NodeId parent = std::get<InitState>(node(n).st).parent;
  graft(parent, rng);
  force_condition(parent);
  marginalize(n);
}

Value DSGraph::value_of(NodeId n, Rng& rng) {
  if (const auto* r = std::get_if<RealState>(&node(n).st)) return r->v;
  graft(n, rng);
  sample_node(n, rng);
  return std::get<RealState>(node(n).st).v;
}

double DSGraph::observe_node(NodeId n, const Value& obs, Rng& rng) {
  graft(n, rng);
  force_condition(n);
  const auto* m = std::get_if<MargState>(&node(n).st);
  if (!m || m->child) throw GraphError("observe: node is not a free marginal");
  double w = pdf(m->m, obs);
  realize(n, obs);
  return w;
}

bool DSGraph::is_initialized(NodeId n) const {
  return std::holds_alternative<InitState>(node(n).st);
}
bool DSGraph::is_marginalized(NodeId n) const {
  return std::holds_alternative<MargState>(node(n).st);
}
bool DSGraph::is_realized(NodeId n) const {
  return std::holds_alternative<RealState>(node(n).st);
}

DSGraph::Family DSGraph::family(NodeId n) const {
  if (const auto* init = std::get_if<InitState>(&node(n).st)) {
    // The only conditional handing a closed-form marginal to its child is
    // the affine gaussian one.
    if (std::holds_alternative<CGaussianMean>(init->cd)) return Family::Gaussian;
    return Family::Other;
  }
  if (const auto* m = std::get_if<MargState>(&node(n).st)) {
    if (std::holds_alternative<Gaussian>(m->m)) return Family::Gaussian;
    if (std::holds_alternative<BetaD>(m->m)) return Family::Beta;
  }
  return Family::Other;
}

std::set<NodeId> DSGraph::reachable(const std::vector<NodeId>& roots) const {
  std::set<NodeId> seen;
  std::vector<NodeId> work(roots.begin(), roots.end());
  while (!work.empty()) {
    NodeId n = work.back();
    work.pop_back();
    if (n >= nodes_.size() || !seen.insert(n).second) continue;
    if (const auto* init = std::get_if<InitState>(&node(n).st)) {
      work.push_back(init->parent);
    } else if (const auto* m = std::get_if<MargState>(&node(n).st)) {
      if (m->child) work.push_back(m->child->first);
    }
  }
  return seen;
}

DSGraph::ChainProfile DSGraph::chain_profile() const {
  ChainProfile out;
  // Initialized chains climb parent links; count edges whose both ends are
  // Initialized, maximizing over starting nodes.
  for (NodeId n = 0; n < nodes_.size(); ++n) {
    size_t len = 0;
    NodeId cur = n;
    while (is_initialized(cur)) {
      NodeId p = std::get<InitState>(node(cur).st).parent;
      if (!is_initialized(p)) break;
      ++len;
      cur = p;
    }
    if (len > out.max_init_chain) out.max_init_chain = len;
  }
  // Marginalized chains descend child links.
  for (NodeId n = 0; n < nodes_.size(); ++n) {
    size_t len = 0;
    NodeId cur = n;
    while (is_marginalized(cur)) {
      const auto& m = std::get<MargState>(node(cur).st);
      if (!m.child || !is_marginalized(m.child->first)) break;
      ++len;
      cur = m.child->first;
    }
    if (len > out.max_marg_chain) out.max_marg_chain = len;
  }
  return out;
}

std::string DSGraph::dump() const {
  std::ostringstream os;
  for (NodeId n = 0; n < nodes_.size(); ++n) {
    os << n << ": ";
    if (const auto* init = std::get_if<InitState>(&node(n).st)) {
      os << "init parent=" << init->parent << " cd=";
      if (const auto* g = std::get_if<CGaussianMean>(&init->cd))
        os << "cgaussian(" << g->var << ", " << g->scale << ", " << g->shift << ")";
      else
        os << "cbernoulli";
    } else if (const auto* m = std::get_if<MargState>(&node(n).st)) {
      os << "marg " << dist_describe(m->m);
      if (m->child) os << " child=" << m->child->first;
    } else {
      os << "real " << value_describe(std::get<RealState>(node(n).st).v);
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace muf
