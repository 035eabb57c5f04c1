#include "muf/analysis.hpp"

#include <algorithm>
#include <iterator>
#include <memory>
#include <utility>

namespace muf {

namespace {

std::set<AVar> inter(const std::set<AVar>& a, const std::set<AVar>& b) {
  std::set<AVar> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                        std::inserter(out, out.end()));
  return out;
}

}  // namespace

void MCGraph::assume(AVar x, const RefSet& r) {
  in.insert(x);
  pending[x].insert(r.lb.begin(), r.lb.end());
}

void MCGraph::observe(AVar x, const RefSet& r) {
  con.insert(x);
  con.insert(r.lb.begin(), r.lb.end());
}

void MCGraph::value(const RefSet& r) { con.insert(r.lb.begin(), r.lb.end()); }

std::set<AVar> MCGraph::con_star() const {
  std::set<AVar> star = con;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& [child, parents] : pending) {
      if (!star.count(child)) continue;
      for (AVar p : parents)
        if (star.insert(p).second) changed = true;
    }
  }
  return star;
}

MCGraph MCGraph::join(MCGraph a, const MCGraph& b) {
  a.in.insert(b.in.begin(), b.in.end());
  a.con = inter(a.con, b.con);
  for (const auto& [x, ps] : b.pending) a.pending[x].insert(ps.begin(), ps.end());
  return a;
}

void UPGraph::assume(AVar x, const RefSet& r) {
  // x extends by one every recorded path that ends at one of its unseparated
  // parents; collect first so a self-referential update cannot feed itself.
  std::map<std::pair<AVar, AVar>, std::size_t> add;
  add[{x, x}] = 0;
  for (AVar xp : r.ub) {
    if (sep.count(xp)) continue;
    for (const auto& [key, len] : p) {
      if (key.second != xp) continue;
      auto& slot = add[{key.first, x}];
      slot = std::max(slot, len + 1);
    }
  }
  for (const auto& [key, len] : add) {
    auto it = p.find(key);
    if (it == p.end() || it->second < len) p[key] = len;
  }
}

void UPGraph::observe(AVar x, const RefSet& r) {
  sep.insert(x);
  sep.insert(r.lb.begin(), r.lb.end());
}

void UPGraph::value(const RefSet& r) { sep.insert(r.lb.begin(), r.lb.end()); }

UPGraph UPGraph::join(UPGraph a, const UPGraph& b) {
  for (const auto& [key, len] : b.p) {
    auto it = a.p.find(key);
    if (it == a.p.end() || it->second < len) a.p[key] = len;
  }
  a.sep = inter(a.sep, b.sep);
  return a;
}

std::size_t path_bound(const RefSet& from, const UPGraph& g) {
  std::size_t best = 0;
  for (const auto& [key, len] : g.p) {
    if (!from.ub.count(key.first)) continue;
    if (g.sep.count(key.second)) continue;
    best = std::max(best, len);
  }
  return best;
}

namespace {

// ------------------------------------------------------------------ types

struct AT;
using ATPtr = std::shared_ptr<const AT>;

struct AEnvNode;
using AEnvPtr = std::shared_ptr<const AEnvNode>;

// Abstract value: the shape of the runtime value plus the reference sets of
// the random variables it can mention. Functions stay symbolic and are
// re-evaluated at every (abstract) call site.
struct AT {
  enum class K { Unit, Ref, Prod, Fun } k = K::Unit;
  RefSet r;             // Ref
  bool shuffle = false; // Ref holding a permutation distribution
  ATPtr fst, snd;       // Prod
  PatternPtr param;     // Fun
  ExprPtr body;
  AEnvPtr env;
  RefSet captured;      // fold of the function's free variables
};

struct AEnvNode {
  std::string name;
  ATPtr t;
  AEnvPtr next;
};

ATPtr at_unit() {
  static const ATPtr u = std::make_shared<const AT>();
  return u;
}

ATPtr at_ref(RefSet r = {}, bool shuffle = false) {
  AT t;
  t.k = AT::K::Ref;
  t.r = std::move(r);
  t.shuffle = shuffle;
  return std::make_shared<const AT>(std::move(t));
}

ATPtr at_prod(ATPtr a, ATPtr b) {
  AT t;
  t.k = AT::K::Prod;
  t.fst = std::move(a);
  t.snd = std::move(b);
  return std::make_shared<const AT>(std::move(t));
}

ATPtr at_fun(PatternPtr param, ExprPtr body, AEnvPtr env, RefSet captured) {
  AT t;
  t.k = AT::K::Fun;
  t.param = std::move(param);
  t.body = std::move(body);
  t.env = std::move(env);
  t.captured = std::move(captured);
  return std::make_shared<const AT>(std::move(t));
}

AEnvPtr aenv_bind(AEnvPtr env, std::string name, ATPtr t) {
  return std::make_shared<const AEnvNode>(
      AEnvNode{std::move(name), std::move(t), std::move(env)});
}

const ATPtr* aenv_find(const AEnvPtr& env, const std::string& name) {
  for (const AEnvNode* n = env.get(); n; n = n->next.get())
    if (n->name == name) return &n->t;
  return nullptr;
}

RefSet fold_at(const ATPtr& t) {
  switch (t->k) {
    case AT::K::Unit:
      return {};
    case AT::K::Ref:
      return t->r;
    case AT::K::Prod: {
      RefSet a = fold_at(t->fst), b = fold_at(t->snd);
      a.lb.insert(b.lb.begin(), b.lb.end());
      a.ub.insert(b.ub.begin(), b.ub.end());
      return a;
    }
    case AT::K::Fun:
      return t->captured;
  }
  return {};
}

std::size_t size_at(const ATPtr& t) {
  switch (t->k) {
    case AT::K::Ref:
      return 1;
    case AT::K::Prod:
      return size_at(t->fst) + size_at(t->snd);
    default:
      return 0;
  }
}

// Shape of a fully evaluated value: same structure, no live references.
ATPtr strip_at(const ATPtr& t) {
  switch (t->k) {
    case AT::K::Ref:
      return at_ref();
    case AT::K::Prod:
      return at_prod(strip_at(t->fst), strip_at(t->snd));
    default:
      return t;
  }
}

bool in_range(AVar x, AVar lo, AVar hi) { return x >= lo && x < hi; }

// Join of two branch results. Upper bounds union; a lower bound survives if
// both branches must consume it or if it was introduced inside the branch
// that mentions it (the other branch cannot see that variable at all, so the
// claim is vacuous there).
ATPtr join_at(const ATPtr& a, const ATPtr& b, AVar b1, AVar e1, AVar b2,
              AVar e2, const SourceLoc& loc) {
  if (a->k != b->k)
    throw AnalysisError(loc.str() + ": branches produce different shapes");
  switch (a->k) {
    case AT::K::Unit:
      return a;
    case AT::K::Ref: {
      RefSet r;
      r.ub = a->r.ub;
      r.ub.insert(b->r.ub.begin(), b->r.ub.end());
      for (AVar x : a->r.lb)
        if (b->r.lb.count(x) || in_range(x, b1, e1)) r.lb.insert(x);
      for (AVar x : b->r.lb)
        if (a->r.lb.count(x) || in_range(x, b2, e2)) r.lb.insert(x);
      return at_ref(std::move(r), a->shuffle && b->shuffle);
    }
    case AT::K::Prod:
      return at_prod(join_at(a->fst, b->fst, b1, e1, b2, e2, loc),
                     join_at(a->snd, b->snd, b1, e1, b2, e2, loc));
    case AT::K::Fun:
      if (a->body == b->body && a->env == b->env) return a;
      throw AnalysisError(loc.str() +
                          ": cannot join distinct functions across branches");
  }
  return a;
}

// ---------------------------------------------------------------- binding

void spread_ref(AEnvPtr& env, const Pattern& pat, const std::set<AVar>& ub) {
  if (const auto* v = std::get_if<PVar>(&pat.p)) {
    env = aenv_bind(env, v->name, at_ref(RefSet{{}, ub}));
  } else if (const auto* t = std::get_if<PTuple>(&pat.p)) {
    for (const auto& part : t->parts) spread_ref(env, *part, ub);
  }
}

AEnvPtr bind_at(AEnvPtr env, const Pattern& pat, const ATPtr& t,
                const SourceLoc& loc) {
  if (const auto* v = std::get_if<PVar>(&pat.p))
    return aenv_bind(std::move(env), v->name, t);
  if (std::holds_alternative<PWild>(pat.p) ||
      std::holds_alternative<PUnit>(pat.p))
    return env;
  const auto& parts = std::get<PTuple>(pat.p).parts;
  if (t->k == AT::K::Ref) {
    // Structure hidden inside a collapsed reference; every name may touch it.
    spread_ref(env, pat, t->r.ub);
    return env;
  }
  ATPtr cur = t;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (cur->k == AT::K::Ref) {
      for (std::size_t j = i; j < parts.size(); ++j)
        spread_ref(env, *parts[j], cur->r.ub);
      return env;
    }
    if (cur->k != AT::K::Prod)
      throw AnalysisError(loc.str() + ": tuple pattern over a non-pair value");
    env = bind_at(std::move(env), *parts[i], cur->fst, loc);
    cur = cur->snd;
  }
  if (parts.empty()) return env;
  return bind_at(std::move(env), *parts.back(), cur, loc);
}

// Fresh opaque value matching a pattern's shape; used for stream inputs,
// which are deterministic data from outside the model.
ATPtr det_shape(const Pattern& pat) {
  if (std::holds_alternative<PUnit>(pat.p)) return at_unit();
  if (const auto* t = std::get_if<PTuple>(&pat.p)) {
    if (t->parts.empty()) return at_unit();
    ATPtr cur = det_shape(*t->parts.back());
    for (std::size_t i = t->parts.size() - 1; i-- > 0;)
      cur = at_prod(det_shape(*t->parts[i]), cur);
    return cur;
  }
  return at_ref();
}

// --------------------------------------------------------- free variables

void pat_names(const Pattern& pat, std::set<std::string>& out) {
  if (const auto* v = std::get_if<PVar>(&pat.p))
    out.insert(v->name);
  else if (const auto* t = std::get_if<PTuple>(&pat.p))
    for (const auto& part : t->parts) pat_names(*part, out);
}

void free_vars(const Expr& e, std::set<std::string> bound,
               std::set<std::string>& out) {
  if (const auto* v = std::get_if<VarE>(&e.e)) {
    if (!bound.count(v->name)) out.insert(v->name);
  } else if (const auto* p = std::get_if<PairE>(&e.e)) {
    free_vars(*p->fst, bound, out);
    free_vars(*p->snd, bound, out);
  } else if (const auto* op = std::get_if<OpAppE>(&e.e)) {
    for (const auto& a : op->args) free_vars(*a, bound, out);
  } else if (const auto* f = std::get_if<FunAppE>(&e.e)) {
    if (!bound.count(f->fn)) out.insert(f->fn);
    free_vars(*f->arg, bound, out);
  } else if (const auto* i = std::get_if<IfE>(&e.e)) {
    free_vars(*i->cond, bound, out);
    free_vars(*i->then_e, bound, out);
    free_vars(*i->else_e, bound, out);
  } else if (const auto* l = std::get_if<LetE>(&e.e)) {
    free_vars(*l->rhs, bound, out);
    pat_names(*l->pat, bound);
    free_vars(*l->body, std::move(bound), out);
  } else if (const auto* u = std::get_if<UnfoldE>(&e.e)) {
    free_vars(*u->inst, bound, out);
    free_vars(*u->arg, bound, out);
  } else if (const auto* s = std::get_if<SampleE>(&e.e)) {
    free_vars(*s->dist, bound, out);
  } else if (const auto* o = std::get_if<ObserveE>(&e.e)) {
    free_vars(*o->dist, bound, out);
    free_vars(*o->data, bound, out);
  } else if (const auto* lam = std::get_if<LambdaE>(&e.e)) {
    pat_names(*lam->param, bound);
    free_vars(*lam->body, std::move(bound), out);
  }
}

// -------------------------------------------------------------- evaluator

bool is_class_a(const std::string& op) {
  return op == "plus" || op == "sub" || op == "mult" || op == "div" ||
         op == "ite" || op == "gaussian" || op == "beta" || op == "uniform" ||
         op == "bernoulli" || op == "poisson";
}

bool is_class_b(const std::string& op) {
  return op == "lt" || op == "eq" || op == "not" || op == "mean";
}

template <class G>
struct AbsEval {
  const Program& prog;
  AVar& counter;
  G* g;
  int depth = 0;
  std::map<AVar, std::string>* labels = nullptr;

  AVar fresh() { return counter++; }

  // Remember the binder name of a directly let-bound sample for reporting.
  void label(const Pattern& pat, const ATPtr& t) {
    if (!labels) return;
    const auto* v = std::get_if<PVar>(&pat.p);
    if (!v || t->k != AT::K::Ref || t->r.lb.size() != 1) return;
    AVar x = *t->r.lb.begin();
    if (t->r.ub == t->r.lb) labels->emplace(x, v->name);
  }

  static RefSet fold_all(const std::vector<ATPtr>& ts) {
    RefSet u;
    for (const auto& t : ts) {
      RefSet r = fold_at(t);
      u.lb.insert(r.lb.begin(), r.lb.end());
      u.ub.insert(r.ub.begin(), r.ub.end());
    }
    return u;
  }

  ATPtr apply_fun(const ATPtr& f, const ATPtr& arg, const SourceLoc& loc) {
    if (f->k != AT::K::Fun)
      throw AnalysisError(loc.str() + ": expected a function");
    if (depth >= 64)
      throw AnalysisError(loc.str() +
                          ": call nesting too deep (recursion unsupported)");
    AbsEval<G> sub{prog, counter, g, depth + 1, labels};
    return sub.eval(bind_at(f->env, *f->param, arg, loc), *f->body);
  }

  ATPtr apply_op(const std::string& op, const std::vector<ATPtr>& ts,
                 const SourceLoc& loc) {
    auto need = [&](std::size_t n) {
      if (ts.size() != n)
        throw AnalysisError(loc.str() + ": " + op + " expects " +
                            std::to_string(n) + " arguments");
    };
    if (is_class_a(op)) return at_ref(fold_all(ts));
    if (op == "shuffle") {
      need(1);
      return at_ref(fold_at(ts[0]), true);
    }
    if (is_class_b(op)) {
      g->value(fold_all(ts));
      return at_ref();
    }
    if (op == "eval") {
      need(1);
      g->value(fold_at(ts[0]));
      return strip_at(ts[0]);
    }
    if (op == "List.nil" || op == "Array.empty") return at_ref();
    if (op == "List.init" || op == "Array.init") {
      need(2);
      g->value(fold_at(ts[0]));  // symbolic count is forced
      ATPtr elem = apply_fun(ts[1], at_ref(), loc);
      return at_ref(RefSet{{}, fold_at(elem).ub});
    }
    if (op == "List.map") {
      need(2);
      ATPtr elem = at_ref(RefSet{{}, fold_at(ts[1]).ub});
      ATPtr out = apply_fun(ts[0], elem, loc);
      // fresh elements replace the old ones
      return at_ref(RefSet{{}, fold_at(out).ub});
    }
    if (op == "List.filter") {
      need(2);
      ATPtr elem = at_ref(RefSet{{}, fold_at(ts[1]).ub});
      ATPtr pred = apply_fun(ts[0], elem, loc);
      g->value(fold_at(pred));  // symbolic predicate result is forced
      return at_ref(RefSet{{}, fold_at(ts[1]).ub});
    }
    if (op == "List.append") {
      need(2);
      RefSet r{{}, fold_at(ts[0]).ub};
      const RefSet r2 = fold_at(ts[1]);
      r.ub.insert(r2.ub.begin(), r2.ub.end());
      return at_ref(std::move(r));
    }
    if (op == "List.length") {
      need(1);
      return at_ref();  // structural, never forces the elements
    }
    if (op == "List.iter2") {
      need(3);
      ATPtr e1 = at_ref(RefSet{{}, fold_at(ts[1]).ub});
      ATPtr e2 = at_ref(RefSet{{}, fold_at(ts[2]).ub});
      apply_fun(ts[0], at_prod(e1, e2), loc);
      return at_unit();
    }
    if (op == "Array.get") {
      need(2);
      g->value(fold_at(ts[1]));  // symbolic index is forced
      return at_ref(RefSet{{}, fold_at(ts[0]).ub});
    }
    throw AnalysisError(loc.str() + ": unknown operator " + op);
  }

  ATPtr eval(const AEnvPtr& env, const Expr& e) {
    if (const auto* c = std::get_if<ConstE>(&e.e))
      return c->v.is_unit() ? at_unit() : at_ref();
    if (const auto* v = std::get_if<VarE>(&e.e)) {
      const ATPtr* t = aenv_find(env, v->name);
      if (!t) throw AnalysisError(e.loc.str() + ": unbound " + v->name);
      return *t;
    }
    if (const auto* p = std::get_if<PairE>(&e.e)) {
      ATPtr a = eval(env, *p->fst);
      return at_prod(std::move(a), eval(env, *p->snd));
    }
    if (const auto* op = std::get_if<OpAppE>(&e.e)) {
      std::vector<ATPtr> ts;
      ts.reserve(op->args.size());
      for (const auto& a : op->args) ts.push_back(eval(env, *a));
      return apply_op(op->op, ts, e.loc);
    }
    if (const auto* f = std::get_if<FunAppE>(&e.e)) {
      const ATPtr* fv = aenv_find(env, f->fn);
      if (!fv) throw AnalysisError(e.loc.str() + ": unbound " + f->fn);
      ATPtr arg = eval(env, *f->arg);
      return apply_fun(*fv, arg, e.loc);
    }
    if (const auto* i = std::get_if<IfE>(&e.e)) {
      ATPtr c = eval(env, *i->cond);
      g->value(fold_at(c));  // a symbolic condition is forced
      G base = *g;
      AVar c0 = counter;
      ATPtr t1 = eval(env, *i->then_e);
      G g1 = std::move(*g);
      AVar c1 = counter;
      *g = std::move(base);
      ATPtr t2 = eval(env, *i->else_e);
      AVar c2 = counter;
      *g = G::join(std::move(g1), *g);
      return join_at(t1, t2, c0, c1, c1, c2, e.loc);
    }
    if (const auto* l = std::get_if<LetE>(&e.e)) {
      ATPtr rhs = eval(env, *l->rhs);
      label(*l->pat, rhs);
      return eval(bind_at(env, *l->pat, rhs, e.loc), *l->body);
    }
    if (const auto* s = std::get_if<SampleE>(&e.e)) {
      ATPtr d = eval(env, *s->dist);
      RefSet r = fold_at(d);
      if (d->k == AT::K::Ref && d->shuffle) {
        // permutations draw eagerly and introduce no random variable
        return at_ref(RefSet{{}, std::move(r.ub)});
      }
      AVar x = fresh();
      g->assume(x, r);
      return at_ref(RefSet{{x}, {x}});
    }
    if (const auto* o = std::get_if<ObserveE>(&e.e)) {
      ATPtr d = eval(env, *o->dist);
      ATPtr data = eval(env, *o->data);
      if (d->k == AT::K::Ref && d->shuffle)
        throw AnalysisError(e.loc.str() +
                            ": cannot observe a permutation distribution");
      AVar y = fresh();
      g->assume(y, fold_at(d));
      RefSet r2 = fold_at(data);
      g->value(r2);
      g->observe(y, r2);
      return at_unit();
    }
    if (const auto* lam = std::get_if<LambdaE>(&e.e)) {
      std::set<std::string> names, fv;
      pat_names(*lam->param, names);
      free_vars(*lam->body, std::move(names), fv);
      RefSet cap;
      for (const auto& n : fv)
        if (const ATPtr* t = aenv_find(env, n)) {
          RefSet r = fold_at(*t);
          cap.lb.insert(r.lb.begin(), r.lb.end());
          cap.ub.insert(r.ub.begin(), r.ub.end());
        }
      return at_fun(lam->param, lam->body, env, std::move(cap));
    }
    // init / unfold / infer have no probabilistic typing rule
    throw AnalysisError(e.loc.str() +
                        ": stream instantiation inside a probabilistic body");
  }
};

// -------------------------------------------------------------- iteration

struct IterInfo {
  AVar begin = 0, end = 0;  // variables introduced during this iteration
  ATPtr state;
  RefSet state_r;
};

template <class G>
struct Engine {
  const Program& prog;
  const StreamDecl& decl;
  AEnvPtr top;
  AVar counter = 0;
  G g{};
  ATPtr state;
  std::vector<IterInfo> iters;
  std::map<AVar, std::string> labels;

  Engine(const Program& p, const StreamDecl& d, AEnvPtr t)
      : prog(p), decl(d), top(std::move(t)) {
    AbsEval<G> ev{prog, counter, &g, 0, &labels};
    state = ev.eval(top, *decl.init);
  }

  void run_iteration() {
    AVar begin = counter;
    AbsEval<G> ev{prog, counter, &g, 0, &labels};
    AEnvPtr env = bind_at(top, *decl.p_state, state, decl.loc);
    env = bind_at(env, *decl.p_in, det_shape(*decl.p_in), decl.loc);
    ATPtr res = ev.eval(env, *decl.body);
    if (res->k != AT::K::Prod)
      throw AnalysisError(decl.loc.str() +
                          ": stream body must produce (output, state)");
    state = res->snd;
    iters.push_back({begin, counter, state, fold_at(state)});
  }
};

struct McResult {
  bool ok = false;
  int n = -1;
  std::vector<std::string> unconsumed;
};

// The consumption check: every random variable the state still references
// after the first iteration must eventually be consumed. Progress is
// measured on variables older than the current iteration; the analysis
// only gives up after a full state-size worth of silent iterations, since
// a variable can sit in a shift register that long before being observed.
McResult run_mc(const Program& prog, const StreamDecl& decl, const AEnvPtr& top,
                const AnalysisOptions& opt) {
  Engine<MCGraph> eng(prog, decl, top);
  eng.run_iteration();
  const IterInfo& it0 = eng.iters[0];
  std::set<AVar> need;
  for (AVar x : it0.state_r.ub)
    if (in_range(x, it0.begin, it0.end)) need.insert(x);
  const std::size_t stall_limit = size_at(eng.state) + 1;
  std::size_t quiet = 0;
  std::set<AVar> star = eng.g.con_star();
  int n = 0;
  for (;;) {
    bool ok = true;
    for (AVar x : need)
      if (!star.count(x)) {
        ok = false;
        break;
      }
    if (ok) return {true, n, {}};
    if (n >= opt.mc_budget || quiet > stall_limit) break;
    AVar before = eng.counter;
    std::set<AVar> old = star;
    eng.run_iteration();
    ++n;
    star = eng.g.con_star();
    bool progress = false;
    for (AVar x : star)
      if (x < before && !old.count(x)) {
        progress = true;
        break;
      }
    quiet = progress ? 0 : quiet + 1;
  }
  McResult fail{false, -1, {}};
  for (AVar x : need) {
    if (star.count(x)) continue;
    auto it = eng.labels.find(x);
    fail.unconsumed.push_back(it != eng.labels.end()
                                  ? it->second
                                  : "v" + std::to_string(x));
  }
  return fail;
}

struct UpResult {
  bool ok = false;
  int iterations = -1;
  std::size_t path = 0;
};

// The path check: the longest unseparated path rooted in the live state must
// stop growing. A candidate bound observed after iteration n is confirmed by
// running size(state) times that many iterations further and checking the
// bound did not move.
UpResult run_up(const Program& prog, const StreamDecl& decl, const AEnvPtr& top,
                const AnalysisOptions& opt) {
  Engine<UPGraph> eng(prog, decl, top);
  std::vector<std::size_t> paths;
  auto ensure = [&](std::size_t i) {
    while (eng.iters.size() <= i) {
      eng.run_iteration();
      paths.push_back(path_bound(eng.iters.back().state_r, eng.g));
    }
  };
  const std::size_t hard_cap = 2000;
  std::size_t last = 0;
  for (int base = 0; base < opt.up_budget; ++base) {
    ensure(static_cast<std::size_t>(base));
    std::size_t pb = paths[static_cast<std::size_t>(base)];
    last = pb;
    std::size_t look =
        static_cast<std::size_t>(base) + pb * size_at(eng.state) + 1;
    if (look > hard_cap) break;
    ensure(look);
    if (paths[look] == pb) return {true, base + 1, pb};
  }
  return {false, -1, last};
}

// ------------------------------------------------------------ entry points

AEnvPtr build_top(const Program& prog) {
  AEnvPtr env;
  AVar counter = 0;
  MCGraph scratch;
  AbsEval<MCGraph> ev{prog, counter, &scratch};
  for (const auto& d : prog.decls) {
    if (const auto* vd = std::get_if<ValDecl>(&d)) {
      try {
        ATPtr t = ev.eval(env, *vd->rhs);
        env = bind_at(env, *vd->pat, t, vd->loc);
      } catch (const AnalysisError&) {
        // opaque deterministic data (e.g. a stream instance); no references
        spread_ref(env, *vd->pat, {});
      }
    } else if (const auto* fd = std::get_if<FunDecl>(&d)) {
      env = aenv_bind(env, fd->name, at_fun(fd->param, fd->body, env, {}));
    }
    // stream declarations are only reachable through infer/init by name
  }
  return env;
}

void find_infer_sites(const ExprPtr& e,
                      std::vector<std::pair<std::string, SourceLoc>>& out) {
  if (!e) return;
  if (const auto* in = std::get_if<InferE>(&e->e)) {
    out.emplace_back(in->stream, e->loc);
    return;
  }
  if (const auto* p = std::get_if<PairE>(&e->e)) {
    find_infer_sites(p->fst, out);
    find_infer_sites(p->snd, out);
  } else if (const auto* op = std::get_if<OpAppE>(&e->e)) {
    for (const auto& a : op->args) find_infer_sites(a, out);
  } else if (const auto* f = std::get_if<FunAppE>(&e->e)) {
    find_infer_sites(f->arg, out);
  } else if (const auto* i = std::get_if<IfE>(&e->e)) {
    find_infer_sites(i->cond, out);
    find_infer_sites(i->then_e, out);
    find_infer_sites(i->else_e, out);
  } else if (const auto* l = std::get_if<LetE>(&e->e)) {
    find_infer_sites(l->rhs, out);
    find_infer_sites(l->body, out);
  } else if (const auto* u = std::get_if<UnfoldE>(&e->e)) {
    find_infer_sites(u->inst, out);
    find_infer_sites(u->arg, out);
  } else if (const auto* s = std::get_if<SampleE>(&e->e)) {
    find_infer_sites(s->dist, out);
  } else if (const auto* o = std::get_if<ObserveE>(&e->e)) {
    find_infer_sites(o->dist, out);
    find_infer_sites(o->data, out);
  } else if (const auto* lam = std::get_if<LambdaE>(&e->e)) {
    find_infer_sites(lam->body, out);
  }
}

}  // namespace

SiteReport analyze_stream(const Program& prog, const StreamDecl& s,
                          AnalysisOptions opt) {
  SiteReport r;
  r.stream = s.name;
  r.loc = s.loc;
  try {
    AEnvPtr top = build_top(prog);
    McResult mc = run_mc(prog, s, top, opt);
    r.mc = mc.ok;
    r.mc_iterations = mc.n;
    r.mc_unconsumed = std::move(mc.unconsumed);
    UpResult up = run_up(prog, s, top, opt);
    r.up = up.ok;
    r.up_iterations = up.iterations;
    r.up_longest_path = up.path;
  } catch (const AnalysisError& err) {
    r.mc = false;
    r.up = false;
    r.note = err.what();
  }
  r.bounded = r.mc && r.up;
  return r;
}

std::vector<SiteReport> analyze_program(const Program& prog,
                                        AnalysisOptions opt) {
  std::vector<std::pair<std::string, SourceLoc>> sites;
  for (const auto& d : prog.decls) {
    if (const auto* vd = std::get_if<ValDecl>(&d)) {
      find_infer_sites(vd->rhs, sites);
    } else if (const auto* fd = std::get_if<FunDecl>(&d)) {
      find_infer_sites(fd->body, sites);
    } else {
      const auto& sd = std::get<StreamDecl>(d);
      find_infer_sites(sd.init, sites);
      find_infer_sites(sd.body, sites);
    }
  }
  std::vector<SiteReport> out;
  out.reserve(sites.size());
  for (const auto& [name, loc] : sites) {
    const StreamDecl* sd = prog.find_stream(name);
    if (!sd) continue;  // the type checker reports this case
    SiteReport r = analyze_stream(prog, *sd, opt);
    r.loc = loc;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace muf
