#include "muf/interp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>

#include "muf/source.hpp"
#include "muf/types.hpp"

namespace muf {

namespace {

constexpr int kMcDraws = 1000;

using PairPtr = std::shared_ptr<const PairV>;
using SymPtr = std::shared_ptr<const SymApp>;
using ListPtr = std::shared_ptr<const ListV>;
using ArrayPtr = std::shared_ptr<const ArrayV>;

bool mentions_rv(const Value& v) { return !collect_rvs(v).empty(); }

[[noreturn]] void eval_fail(const SourceLoc& loc, const std::string& msg) {
  throw EvalError(loc.str() + ": " + msg);
}

// Affine view of a symbolic numeric value: scale * x + shift over at most
// one random variable (the shape delayed conditioning can absorb).
struct Affine {
  std::optional<NodeId> x;
  double scale = 0.0;
  double shift = 0.0;
};

std::optional<Affine> affine_of(const Value& v) {
  if (const auto* d = v.get_if<double>()) return Affine{std::nullopt, 0.0, *d};
  if (const auto* n = v.get_if<long>())
    return Affine{std::nullopt, 0.0, static_cast<double>(*n)};
  if (const auto* rv = v.get_if<RV>()) return Affine{rv->id, 1.0, 0.0};
  const auto* sa = v.get_if<SymPtr>();
  if (!sa) return std::nullopt;
  const std::string& op = (*sa)->op;
  if ((*sa)->args.size() != 2) return std::nullopt;
  auto a = affine_of((*sa)->args[0]);
  auto b = affine_of((*sa)->args[1]);
  if (!a || !b) return std::nullopt;
  if (op == "plus" || op == "sub") {
    double sgn = op == "plus" ? 1.0 : -1.0;
    if (a->x && b->x) {
      if (*a->x != *b->x) return std::nullopt;
      return Affine{a->x, a->scale + sgn * b->scale, a->shift + sgn * b->shift};
    }
    return Affine{a->x ? a->x : b->x, a->scale + sgn * b->scale,
                  a->shift + sgn * b->shift};
  }
  if (op == "mult") {
    if (a->x && b->x) return std::nullopt;
    if (b->x) std::swap(a, b);  // keep the variable on the left
    return Affine{a->x, a->scale * b->shift, a->shift * b->shift};
  }
  if (op == "div") {
    if (b->x || b->shift == 0.0) return std::nullopt;
    return Affine{a->x, a->scale / b->shift, a->shift / b->shift};
  }
  return std::nullopt;
}

// Concrete application of the operators that may appear inside symbolic
// values (arithmetic, select, distribution constructors). Everything else
// is forced before it ever becomes symbolic.
Value apply_const_op(const std::string& op, const std::vector<Value>& args,
                     const SourceLoc& loc) {
  auto num2 = [&](auto f_int, auto f_real) -> Value {
    const long* x = args[0].get_if<long>();
    const long* y = args[1].get_if<long>();
    if (x && y) return Value::of_int(f_int(*x, *y));
    return Value::of_real(f_real(as_real(args[0]), as_real(args[1])));
  };
  if (op == "plus")
    return num2([](long a, long b) { return a + b; },
                [](double a, double b) { return a + b; });
  if (op == "sub")
    return num2([](long a, long b) { return a - b; },
                [](double a, double b) { return a - b; });
  if (op == "mult")
    return num2([](long a, long b) { return a * b; },
                [](double a, double b) { return a * b; });
  if (op == "div") {
    if (args[0].get_if<long>() && args[1].get_if<long>()) {
      long d = as_int(args[1]);
      if (d == 0) eval_fail(loc, "integer division by zero");
      return Value::of_int(as_int(args[0]) / d);
    }
    return Value::of_real(as_real(args[0]) / as_real(args[1]));
  }
  if (op == "ite") return as_bool(args[0]) ? args[1] : args[2];
  if (op == "gaussian") {
    double var = as_real(args[1]);
    if (!(var > 0.0)) eval_fail(loc, "gaussian variance must be positive");
    return Value::dist(Gaussian{as_real(args[0]), var});
  }
  if (op == "beta") {
    double a = as_real(args[0]), b = as_real(args[1]);
    if (!(a > 0.0) || !(b > 0.0)) eval_fail(loc, "beta parameters must be positive");
    return Value::dist(BetaD{a, b});
  }
  if (op == "uniform") {
    double lo = as_real(args[0]), hi = as_real(args[1]);
    if (!(lo < hi)) eval_fail(loc, "uniform needs lo < hi");
    return Value::dist(UniformD{lo, hi});
  }
  if (op == "bernoulli") {
    double p = as_real(args[0]);
    if (!(p >= 0.0 && p <= 1.0)) eval_fail(loc, "bernoulli probability outside [0, 1]");
    return Value::dist(BernoulliD{p});
  }
  if (op == "poisson") {
    double rate = as_real(args[0]);
    if (!(rate > 0.0)) eval_fail(loc, "poisson rate must be positive");
    return Value::dist(PoissonD{rate});
  }
  if (op == "shuffle") {
    const auto* l = args[0].get_if<ListPtr>();
    if (!l) eval_fail(loc, "shuffle expects a list");
    return Value::dist(ShuffleD{std::make_shared<const std::vector<Value>>((*l)->items)});
  }
  eval_fail(loc, "operator " + op + " cannot stay symbolic");
}

const SourceLoc kNoLoc{};

std::optional<MDistr> rv_distribution(const DSGraph& g, NodeId x) {
  const Node& n = g.node(x);
  if (const auto* r = std::get_if<RealState>(&n.st))
    return DeltaD{std::make_shared<const Value>(r->v)};
  if (const auto* m = std::get_if<MargState>(&n.st)) {
    if (m->child && g.is_realized(m->child->first)) {
      const auto& cv = std::get<RealState>(g.node(m->child->first).st).v;
      return make_conditional(m->m, m->child->second, cv);
    }
    return m->m;
  }
  const auto& in = std::get<InitState>(n.st);
  auto dp = rv_distribution(g, in.parent);
  if (!dp) return std::nullopt;
  if (const auto* dd = std::get_if<DeltaD>(&*dp)) return cdistr_to_mdistr(in.cd, *dd->v);
  if (conjugate(*dp, in.cd)) return make_marginal(*dp, in.cd);
  return std::nullopt;
}

MDistr mc_distribution(const Value& v, const DSGraph& g, Rng& rng) {
  uint64_t seed = rng.next_u64();
  auto support = std::make_shared<std::vector<std::pair<Value, double>>>();
  support->reserve(kMcDraws);
  for (int i = 0; i < kMcDraws; ++i) {
    DSGraph gc = g;
    Rng ri = Rng::derive(seed, static_cast<uint64_t>(i), 0);
    for (NodeId x : free_rvs(gc, v)) gc.value_of(x, ri);
    support->push_back({resolve_value(gc, v), 1.0 / kMcDraws});
  }
  return CategoricalD{std::move(support)};
}

}  // namespace

EnvPtr env_bind(EnvPtr env, std::string name, Value v) {
  return std::make_shared<const Env>(Env{std::move(name), std::move(v), std::move(env)});
}

const Value* env_lookup(const EnvPtr& env, const std::string& name) {
  for (const Env* e = env.get(); e; e = e->next.get())
    if (e->name == name) return &e->v;
  return nullptr;
}

EnvPtr env_bind_pattern(EnvPtr env, const Pattern& pat, const Value& v) {
  if (const auto* pv = std::get_if<PVar>(&pat.p)) return env_bind(std::move(env), pv->name, v);
  if (std::holds_alternative<PWild>(pat.p)) return env;
  if (std::holds_alternative<PUnit>(pat.p)) {
    if (!v.is_unit())
      throw EvalError(pat.loc.str() + ": unit pattern against " + value_describe(v));
    return env;
  }
  const auto& t = std::get<PTuple>(pat.p);
  const Value* cur = &v;
  for (size_t i = 0; i + 1 < t.parts.size(); ++i) {
    const auto* pr = cur->get_if<PairPtr>();
    if (!pr)
      throw EvalError(pat.loc.str() + ": tuple pattern against " + value_describe(*cur));
    env = env_bind_pattern(std::move(env), *t.parts[i], (*pr)->fst);
    cur = &(*pr)->snd;
  }
  return env_bind_pattern(std::move(env), *t.parts.back(), *cur);
}

std::vector<NodeId> free_rvs(const DSGraph& g, const Value& v) {
  std::vector<NodeId> out;
  for (NodeId x : collect_rvs(v))
    if (!g.is_realized(x)) out.push_back(x);
  return out;
}

Value resolve_value(const DSGraph& g, const Value& v) {
  if (const auto* rv = v.get_if<RV>()) {
    if (const auto* r = std::get_if<RealState>(&g.node(rv->id).st)) return r->v;
    return v;
  }
  if (const auto* p = v.get_if<PairPtr>())
    return Value::pair(resolve_value(g, (*p)->fst), resolve_value(g, (*p)->snd));
  if (const auto* sa = v.get_if<SymPtr>()) {
    std::vector<Value> args;
    args.reserve((*sa)->args.size());
    bool concrete = true;
    for (const auto& a : (*sa)->args) {
      args.push_back(resolve_value(g, a));
      concrete = concrete && !mentions_rv(args.back());
    }
    if (!concrete) return Value::sym((*sa)->op, std::move(args));
    return apply_const_op((*sa)->op, args, kNoLoc);
  }
  if (const auto* l = v.get_if<ListPtr>()) {
    std::vector<Value> items;
    items.reserve((*l)->items.size());
    for (const auto& a : (*l)->items) items.push_back(resolve_value(g, a));
    return Value::list(std::move(items));
  }
  if (const auto* arr = v.get_if<ArrayPtr>()) {
    std::vector<Value> items;
    items.reserve((*arr)->items.size());
    for (const auto& a : (*arr)->items) items.push_back(resolve_value(g, a));
    return Value::array(std::move(items));
  }
  if (const auto* dv = v.get_if<DistVal>()) {
    if (const auto* sh = std::get_if<ShuffleD>(&dv->d)) {
      auto items = std::make_shared<std::vector<Value>>();
      items->reserve(sh->items->size());
      for (const auto& a : *sh->items) items->push_back(resolve_value(g, a));
      return Value::dist(ShuffleD{std::move(items)});
    }
    if (const auto* dd = std::get_if<DeltaD>(&dv->d))
      return Value::dist(
          DeltaD{std::make_shared<const Value>(resolve_value(g, *dd->v))});
  }
  return v;
}

MDistr value_distribution(const Value& v, const DSGraph& g, Rng rng) {
  if (free_rvs(g, v).empty()) {
    Value r = resolve_value(g, v);
    return DeltaD{std::make_shared<const Value>(std::move(r))};
  }
  if (const auto* rv = v.get_if<RV>()) {
    if (auto d = rv_distribution(g, rv->id)) return *d;
    return mc_distribution(v, g, rng);
  }
  if (v.get_if<SymPtr>()) {
    if (auto af = affine_of(v); af && af->x) {
      if (auto dp = rv_distribution(g, *af->x)) {
        if (const auto* gp = std::get_if<Gaussian>(&*dp))
          return Gaussian{af->scale * gp->mean + af->shift,
                          af->scale * af->scale * gp->var};
        if (const auto* dd = std::get_if<DeltaD>(&*dp))
          return DeltaD{std::make_shared<const Value>(
              Value::of_real(af->scale * as_real(*dd->v) + af->shift))};
      }
    }
    return mc_distribution(v, g, rng);
  }
  return mc_distribution(v, g, rng);
}

Value distribution_value(const Value& v, const DSGraph& g, Rng rng) {
  if (const auto* p = v.get_if<PairPtr>()) {
    Rng a = Rng::derive(rng.next_u64(), 0, 0);
    Rng b = Rng::derive(rng.next_u64(), 1, 0);
    return Value::pair(distribution_value((*p)->fst, g, a),
                       distribution_value((*p)->snd, g, b));
  }
  if (const auto* l = v.get_if<ListPtr>()) {
    std::vector<Value> items;
    items.reserve((*l)->items.size());
    for (const auto& a : (*l)->items)
      items.push_back(distribution_value(a, g, Rng::derive(rng.next_u64(), items.size(), 1)));
    return Value::list(std::move(items));
  }
  if (const auto* arr = v.get_if<ArrayPtr>()) {
    std::vector<Value> items;
    items.reserve((*arr)->items.size());
    for (const auto& a : (*arr)->items)
      items.push_back(distribution_value(a, g, Rng::derive(rng.next_u64(), items.size(), 2)));
    return Value::array(std::move(items));
  }
  return Value::dist(value_distribution(v, g, rng));
}

Interp::Interp(const Program& prog, InterpOptions opt) : prog_(prog), opt_(opt) {
  EnvPtr env;
  for (const auto& d : prog.decls) {
    if (const auto* vd = std::get_if<ValDecl>(&d)) {
      Value v = eval(nullptr, env, *vd->rhs);
      env = env_bind_pattern(env, *vd->pat, v);
    } else if (const auto* fd = std::get_if<FunDecl>(&d)) {
      env = env_bind(env, fd->name, Value(Closure{fd->param.get(), fd->body.get(), env}));
    } else {
      const auto& sd = std::get<StreamDecl>(d);
      decl_envs_[&sd] = env;
      env = env_bind(env, sd.name, Value(StreamVal{&sd, env}));
    }
  }
  top_ = env;
}

Value Interp::eval_det(EnvPtr env, const Expr& e) { return eval(nullptr, env, e); }

Value Interp::eval_prob(Particle& pc, EnvPtr env, const Expr& e) {
  return eval(&pc, env, e);
}

Value Interp::make_instance(const std::string& stream_name) {
  const StreamDecl* sd = prog_.find_stream(stream_name);
  if (!sd) throw EvalError("no stream named " + stream_name);
  const EnvPtr& env = decl_envs_.at(sd);
  StreamVal fn{sd, env};
  if (stream_has_prob_effect(prog_, *sd)) return make_pinstance(fn);
  Value state0 = eval(nullptr, env, *sd->init);
  return Value(std::make_shared<const DInstance>(DInstance{std::move(state0), fn}));
}

Value Interp::make_pinstance(const StreamVal& fn) {
  auto inst = std::make_shared<PInstanceData>();
  inst->fn = fn;
  Rng r = Rng::derive(opt_.seed, 0x1e57a9ce, instance_counter_++);
  inst->seed = r.next_u64();
  Value state0 = eval(nullptr, fn.env, *fn.decl->init);
  inst->particles.resize(static_cast<size_t>(opt_.particles));
  for (auto& pc : inst->particles) pc.state = state0;
  return Value(std::shared_ptr<const PInstanceData>(std::move(inst)));
}

std::pair<Value, Value> Interp::step_instance(const Value& inst, const Value& input) {
  if (const auto* di = inst.get_if<std::shared_ptr<const DInstance>>()) {
    const DInstance& d = **di;
    EnvPtr env = env_bind_pattern(d.fn.env, *d.fn.decl->p_state, d.state);
    env = env_bind_pattern(env, *d.fn.decl->p_in, input);
    Value res = eval(nullptr, env, *d.fn.decl->body);
    const auto* pr = res.get_if<PairPtr>();
    if (!pr)
      eval_fail(d.fn.decl->loc, "stream body must return (output, state)");
    return {(*pr)->fst, Value(std::make_shared<const DInstance>(
                            DInstance{(*pr)->snd, d.fn}))};
  }
  if (const auto* pi = inst.get_if<std::shared_ptr<const PInstanceData>>())
    return step_pinstance(**pi, input);
  throw EvalError("unfold expects a stream instance, got " + value_describe(inst));
}

std::pair<Value, Value> Interp::step_pinstance(const PInstanceData& inst,
                                               const Value& input) {
  const StreamDecl* d = inst.fn.decl;
  auto next = std::make_shared<PInstanceData>();
  next->fn = inst.fn;
  next->seed = inst.seed;
  next->step = inst.step + 1;
  next->particles = inst.particles;

  const size_t n = next->particles.size();
  std::vector<Value> outs(n);
  std::vector<double> weights(n);
  for (size_t j = 0; j < n; ++j) {
    Particle& pc = next->particles[j];
    pc.rng = Rng::derive(inst.seed, inst.step, j);
    pc.weight = 1.0;
    EnvPtr env = env_bind_pattern(inst.fn.env, *d->p_state, pc.state);
    env = env_bind_pattern(env, *d->p_in, input);
    Value res = eval(&pc, env, *d->body);
    const auto* pr = res.get_if<PairPtr>();
    if (!pr) eval_fail(d->loc, "stream body must return (output, state)");
    outs[j] = (*pr)->fst;
    pc.state = (*pr)->snd;
    weights[j] = std::isfinite(pc.weight) && pc.weight > 0.0 ? pc.weight : 0.0;
  }

  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0))
    throw DegenerateError("all particle weights are zero at step " +
                          std::to_string(inst.step));

  // Report the posterior before resampling, while weights still carry the
  // information from this step's observations.
  Value out;
  {
    std::vector<const Value*> vs(n);
    for (size_t j = 0; j < n; ++j) vs[j] = &outs[j];
    size_t leaf = 0;
    std::function<Value(const std::vector<const Value*>&)> mix =
        [&](const std::vector<const Value*>& cur) -> Value {
      bool pairs = true, lists = true, arrays = true;
      size_t len = SIZE_MAX;
      for (const Value* v : cur) {
        pairs = pairs && v->get_if<PairPtr>();
        const auto* l = v->get_if<ListPtr>();
        const auto* a = v->get_if<ArrayPtr>();
        lists = lists && l;
        arrays = arrays && a;
        size_t s = l ? (*l)->items.size() : a ? (*a)->items.size() : SIZE_MAX;
        if (len == SIZE_MAX) len = s;
        if (s != len) lists = arrays = false;
      }
      if (pairs) {
        std::vector<const Value*> fs(n), sn(n);
        for (size_t j = 0; j < n; ++j) {
          const auto& pr = **cur[j]->get_if<PairPtr>();
          fs[j] = &pr.fst;
          sn[j] = &pr.snd;
        }
        Value a = mix(fs);
        return Value::pair(std::move(a), mix(sn));
      }
      if (lists || arrays) {
        std::vector<Value> items;
        items.reserve(len);
        for (size_t i = 0; i < len; ++i) {
          std::vector<const Value*> el(n);
          for (size_t j = 0; j < n; ++j) {
            const auto* l = cur[j]->get_if<ListPtr>();
            el[j] = l ? &(*l)->items[i] : &(*cur[j]->get_if<ArrayPtr>())->items[i];
          }
          items.push_back(mix(el));
        }
        return lists ? Value::list(std::move(items)) : Value::array(std::move(items));
      }
      ++leaf;
      std::vector<std::pair<MDistr, double>> comps;
      comps.reserve(n);
      for (size_t j = 0; j < n; ++j) {
        if (weights[j] == 0.0) continue;
        Rng r = Rng::derive(inst.seed ^ (0x11e0u + leaf), inst.step, n + 1 + j);
        comps.push_back({value_distribution(*cur[j], next->particles[j].graph, r),
                         weights[j]});
      }
      return Value::dist(make_mixture(std::move(comps)));
    };
    out = mix(vs);
  }

  bool uniform = true;
  for (double w : weights) uniform = uniform && w == weights[0];
  if (!uniform) {
    std::vector<double> cum(n);
    double acc = 0.0;
    for (size_t j = 0; j < n; ++j) {
      acc += weights[j];
      cum[j] = acc;
    }
    Rng rr = Rng::derive(inst.seed, inst.step, n);
    std::vector<Particle> resampled;
    resampled.reserve(n);
    for (size_t i = 0; i < n; ++i) {
      double u = rr.uniform01() * total;
      size_t j = static_cast<size_t>(
          std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
      if (j >= n) j = n - 1;
      resampled.push_back(next->particles[j]);
    }
    next->particles = std::move(resampled);
  }
  for (auto& pc : next->particles) pc.weight = 1.0;

  return {std::move(out), Value(std::shared_ptr<const PInstanceData>(std::move(next)))};
}

std::vector<Value> Interp::force_all(Particle& pc, std::vector<Value> vs) {
  std::vector<NodeId> fr;
  for (const auto& v : vs)
    for (NodeId x : collect_rvs(v))
      if (!pc.graph.is_realized(x) && std::find(fr.begin(), fr.end(), x) == fr.end())
        fr.push_back(x);
  if (!fr.empty()) {
    for (NodeId x : fr) pc.graph.value_of(x, pc.rng);
    pc.trace.push_back(EvalEv{fr});
  }
  for (auto& v : vs) v = resolve_value(pc.graph, v);
  return vs;
}

Value Interp::hl_value(Particle& pc, const Value& v) {
  return force_all(pc, {v})[0];
}

Value Interp::hl_sample(Particle& pc, const Value& dist_v) {
  // Permutation distributions never become graph nodes: the permutation is
  // drawn on the spot and the elements stay symbolic.
  auto permute = [&](const std::vector<Value>& src) {
    std::vector<Value> items = src;
    for (size_t i = items.size(); i > 1; --i)
      std::swap(items[i - 1], items[pc.rng.uniform_int(i)]);
    return Value::list(std::move(items));
  };
  Value dist = resolve_value(pc.graph, dist_v);
  if (const auto* dv = dist.get_if<DistVal>())
    if (const auto* sh = std::get_if<ShuffleD>(&dv->d)) return permute(*sh->items);
  if (const auto* sa = dist.get_if<SymPtr>()) {
    const SymApp& app = **sa;
    if (app.op == "shuffle") {
      const auto* l = app.args[0].get_if<ListPtr>();
      if (!l) throw EvalError("shuffle expects a list");
      return permute((*l)->items);
    }
    // Conjugate shapes stay symbolic as a fresh node conditioned on its
    // single parent.
    if (app.op == "gaussian" && !mentions_rv(app.args[1])) {
      double var = as_real(app.args[1]);
      if (var > 0.0) {
        if (auto af = affine_of(app.args[0]);
            af && af->x && pc.graph.family(*af->x) == DSGraph::Family::Gaussian) {
          NodeId x = pc.graph.assume_conditional(*af->x,
                                                 CGaussianMean{var, af->scale, af->shift});
          pc.trace.push_back(AssumeEv{x, *af->x});
          return Value::rv(x);
        }
      }
    }
    if (app.op == "bernoulli") {
      if (const auto* prv = app.args[0].get_if<RV>()) {
        if (pc.graph.family(prv->id) == DSGraph::Family::Beta) {
          NodeId x = pc.graph.assume_conditional(prv->id, CBernoulli{});
          pc.trace.push_back(AssumeEv{x, prv->id});
          return Value::rv(x);
        }
      }
    }
  }
  Value concrete = hl_value(pc, dist);
  const auto* dv = concrete.get_if<DistVal>();
  if (!dv) throw EvalError("sample expects a distribution, got " + value_describe(concrete));
  if (const auto* sh = std::get_if<ShuffleD>(&dv->d)) return permute(*sh->items);
  NodeId x = pc.graph.assume_constant(dv->d);
  pc.trace.push_back(AssumeEv{x, std::nullopt});
  return Value::rv(x);
}

void Interp::hl_observe(Particle& pc, const Value& dist_v, const Value& data_v) {
  Value xv = hl_sample(pc, dist_v);
  const auto* x = xv.get_if<RV>();
  if (!x)
    throw EvalError("observed distribution must be over scalars, got " +
                    value_describe(xv));
  Value data = hl_value(pc, data_v);
  double w = pc.graph.observe_node(x->id, data, pc.rng);
  pc.trace.push_back(ObsEv{x->id});
  pc.weight *= w;
}

Value Interp::call_closure(Particle* pc, const Closure& cl, const Value& arg) {
  return eval(pc, env_bind_pattern(cl.env, *cl.param, arg), *cl.body);
}

Value Interp::apply_op(Particle* pc, const std::string& op, std::vector<Value> args,
                       const SourceLoc& loc) {
  if (pc)
    for (auto& a : args) a = resolve_value(pc->graph, a);
  bool symbolic = false;
  if (pc)
    for (const auto& a : args) symbolic = symbolic || mentions_rv(a);

  // Operators that may stay symbolic over random variables.
  if (op == "plus" || op == "sub" || op == "mult" || op == "div" || op == "ite" ||
      op == "gaussian" || op == "beta" || op == "uniform" || op == "bernoulli" ||
      op == "poisson" || op == "shuffle") {
    if (symbolic) return Value::sym(op, std::move(args));
    return apply_const_op(op, args, loc);
  }

  // Forcing operators: their result is needed concretely.
  if (op == "lt" || op == "eq" || op == "not" || op == "mean") {
    if (pc && symbolic) args = force_all(*pc, std::move(args));
    if (op == "lt") return Value::of_bool(as_real(args[0]) < as_real(args[1]));
    if (op == "eq") return Value::of_bool(value_eq(args[0], args[1]));
    if (op == "not") return Value::of_bool(!as_bool(args[0]));
    const auto* dv = args[0].get_if<DistVal>();
    if (!dv) eval_fail(loc, "mean expects a distribution, got " + value_describe(args[0]));
    return Value::of_real(dist_mean(dv->d));
  }
  if (op == "eval") return pc ? hl_value(*pc, args[0]) : args[0];

  if (op == "List.nil") return Value::list({});
  if (op == "Array.empty") return Value::array({});
  if (op == "List.init" || op == "Array.init") {
    if (pc && mentions_rv(args[0])) args[0] = hl_value(*pc, args[0]);
    long count = as_int(args[0]);
    if (count < 0) eval_fail(loc, "negative length " + std::to_string(count));
    const auto* f = args[1].get_if<Closure>();
    if (!f) eval_fail(loc, "expected a function");
    std::vector<Value> items;
    items.reserve(static_cast<size_t>(count));
    for (long i = 0; i < count; ++i)
      items.push_back(call_closure(pc, *f, Value::of_int(i)));
    return op == "List.init" ? Value::list(std::move(items))
                             : Value::array(std::move(items));
  }
  if (op == "List.map" || op == "List.filter") {
    const auto* f = args[0].get_if<Closure>();
    const auto* l = args[1].get_if<ListPtr>();
    if (!f || !l) eval_fail(loc, op + " expects (function, list)");
    std::vector<Value> items;
    for (const auto& a : (*l)->items) {
      Value r = call_closure(pc, *f, a);
      if (op == "List.map") {
        items.push_back(std::move(r));
      } else {
        if (pc && mentions_rv(r)) r = hl_value(*pc, r);
        if (as_bool(r)) items.push_back(a);
      }
    }
    return Value::list(std::move(items));
  }
  if (op == "List.append") {
    const auto* l1 = args[0].get_if<ListPtr>();
    const auto* l2 = args[1].get_if<ListPtr>();
    if (!l1 || !l2) eval_fail(loc, "List.append expects two lists");
    std::vector<Value> items = (*l1)->items;
    items.insert(items.end(), (*l2)->items.begin(), (*l2)->items.end());
    return Value::list(std::move(items));
  }
  if (op == "List.length") {
    const auto* l = args[0].get_if<ListPtr>();
    if (!l) eval_fail(loc, "List.length expects a list");
    return Value::of_int(static_cast<long>((*l)->items.size()));
  }
  if (op == "List.iter2") {
    const auto* f = args[0].get_if<Closure>();
    const auto* l1 = args[1].get_if<ListPtr>();
    const auto* l2 = args[2].get_if<ListPtr>();
    if (!f || !l1 || !l2) eval_fail(loc, "List.iter2 expects (function, list, list)");
    if ((*l1)->items.size() != (*l2)->items.size())
      eval_fail(loc, "List.iter2 over lists of different lengths");
    for (size_t i = 0; i < (*l1)->items.size(); ++i)
      call_closure(pc, *f, Value::pair((*l1)->items[i], (*l2)->items[i]));
    return Value::unit();
  }
  if (op == "Array.get") {
    const auto* a = args[0].get_if<ArrayPtr>();
    if (!a) eval_fail(loc, "Array.get expects an array");
    if (pc && mentions_rv(args[1])) args[1] = hl_value(*pc, args[1]);
    long i = as_int(args[1]);
    if (i < 0 || static_cast<size_t>(i) >= (*a)->items.size())
      eval_fail(loc, "array index " + std::to_string(i) + " out of range");
    return (*a)->items[static_cast<size_t>(i)];
  }
  eval_fail(loc, "unknown operator " + op);
}

Value Interp::eval(Particle* pc, const EnvPtr& env, const Expr& e) {
  if (const auto* c = std::get_if<ConstE>(&e.e)) return c->v;
  if (const auto* v = std::get_if<VarE>(&e.e)) {
    const Value* found = env_lookup(env, v->name);
    if (!found) eval_fail(e.loc, "unbound variable " + v->name);
    return *found;
  }
  if (const auto* p = std::get_if<PairE>(&e.e)) {
    Value a = eval(pc, env, *p->fst);
    return Value::pair(std::move(a), eval(pc, env, *p->snd));
  }
  if (const auto* op = std::get_if<OpAppE>(&e.e)) {
    std::vector<Value> args;
    args.reserve(op->args.size());
    for (const auto& a : op->args) args.push_back(eval(pc, env, *a));
    return apply_op(pc, op->op, std::move(args), e.loc);
  }
  if (const auto* f = std::get_if<FunAppE>(&e.e)) {
    const Value* fv = env_lookup(env, f->fn);
    if (!fv) eval_fail(e.loc, "unbound function " + f->fn);
    const auto* cl = fv->get_if<Closure>();
    if (!cl) eval_fail(e.loc, f->fn + " is not a function");
    Value arg = eval(pc, env, *f->arg);
    return call_closure(pc, *cl, arg);
  }
  if (const auto* i = std::get_if<IfE>(&e.e)) {
    Value c = eval(pc, env, *i->cond);
    if (pc) c = hl_value(*pc, c);
    return as_bool(c) ? eval(pc, env, *i->then_e) : eval(pc, env, *i->else_e);
  }
  if (const auto* l = std::get_if<LetE>(&e.e)) {
    Value rhs = eval(pc, env, *l->rhs);
    return eval(pc, env_bind_pattern(env, *l->pat, rhs), *l->body);
  }
  if (const auto* in = std::get_if<InitE>(&e.e)) {
    if (pc) eval_fail(e.loc, "init inside a probabilistic stream");
    const StreamDecl* sd = prog_.find_stream(in->stream);
    if (!sd) eval_fail(e.loc, "no stream named " + in->stream);
    const EnvPtr& denv = decl_envs_.at(sd);
    Value state0 = eval(nullptr, denv, *sd->init);
    return Value(std::make_shared<const DInstance>(
        DInstance{std::move(state0), StreamVal{sd, denv}}));
  }
  if (const auto* in = std::get_if<InferE>(&e.e)) {
    if (pc) eval_fail(e.loc, "infer inside a probabilistic stream");
    const StreamDecl* sd = prog_.find_stream(in->stream);
    if (!sd) eval_fail(e.loc, "no stream named " + in->stream);
    return make_pinstance(StreamVal{sd, decl_envs_.at(sd)});
  }
  if (const auto* u = std::get_if<UnfoldE>(&e.e)) {
    if (pc) eval_fail(e.loc, "unfold inside a probabilistic stream");
    Value inst = eval(pc, env, *u->inst);
    Value arg = eval(pc, env, *u->arg);
    auto [out, next] = step_instance(inst, arg);
    return Value::pair(std::move(out), std::move(next));
  }
  if (const auto* s = std::get_if<SampleE>(&e.e)) {
    if (!pc) eval_fail(e.loc, "sample outside inference");
    Value d = eval(pc, env, *s->dist);
    return hl_sample(*pc, d);
  }
  if (const auto* o = std::get_if<ObserveE>(&e.e)) {
    if (!pc) eval_fail(e.loc, "observe outside inference");
    Value d = eval(pc, env, *o->dist);
    Value data = eval(pc, env, *o->data);
    hl_observe(*pc, d, data);
    return Value::unit();
  }
  const auto& lam = std::get<LambdaE>(e.e);
  return Value(Closure{lam.param.get(), lam.body.get(), env});
}

}  // namespace muf
