#include "muf/dist.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "muf/source.hpp"
#include "muf/value.hpp"

namespace muf {

namespace {

constexpr double kTau = 6.283185307179586476925286766559;  // 2*pi

[[noreturn]] void moment_error(const MDistr& d) {
  throw EvalError("moments undefined for " + dist_describe(d));
}

}  // namespace

bool conjugate(const MDistr& parent, const CDistr& cd) {
  if (std::holds_alternative<Gaussian>(parent) &&
      std::holds_alternative<CGaussianMean>(cd))
    return true;
  if (std::holds_alternative<BetaD>(parent) && std::holds_alternative<CBernoulli>(cd))
    return true;
  return false;
}

MDistr make_marginal(const MDistr& parent, const CDistr& cd) {
  if (const auto* g = std::get_if<Gaussian>(&parent)) {
    if (const auto* c = std::get_if<CGaussianMean>(&cd))
      return Gaussian{c->scale * g->mean + c->shift,
                      c->scale * c->scale * g->var + c->var};
  }
  if (const auto* b = std::get_if<BetaD>(&parent)) {
    if (std::holds_alternative<CBernoulli>(cd))
      return BernoulliD{b->a / (b->a + b->b)};
  }
  throw GraphError("make_marginal: pair is not conjugate");
}

MDistr make_conditional(const MDistr& parent, const CDistr& cd, const Value& obs) {
  if (const auto* g = std::get_if<Gaussian>(&parent)) {
    if (const auto* c = std::get_if<CGaussianMean>(&cd)) {
      // Posterior of the parent given child = obs, child mean affine in
      // the parent: precision-weighted combination.
      double y = as_real(obs);
      double prec = 1.0 / g->var + c->scale * c->scale / c->var;
      double post_var = 1.0 / prec;
      double post_mean =
          post_var * (g->mean / g->var + c->scale * (y - c->shift) / c->var);
      return Gaussian{post_mean, post_var};
    }
  }
  if (const auto* b = std::get_if<BetaD>(&parent)) {
    if (std::holds_alternative<CBernoulli>(cd)) {
      if (as_bool(obs)) return BetaD{b->a + 1.0, b->b};
      return BetaD{b->a, b->b + 1.0};
    }
  }
  throw GraphError("make_conditional: pair is not conjugate");
}

MDistr cdistr_to_mdistr(const CDistr& cd, const Value& parent_value) {
  if (const auto* c = std::get_if<CGaussianMean>(&cd))
    return Gaussian{c->scale * as_real(parent_value) + c->shift, c->var};
  return BernoulliD{as_real(parent_value)};
}

Value draw(const MDistr& d, Rng& rng) {
  if (const auto* g = std::get_if<Gaussian>(&d))
    return Value::of_real(rng.normal(g->mean, g->var));
  if (const auto* b = std::get_if<BetaD>(&d))
    return Value::of_real(rng.beta(b->a, b->b));
  if (const auto* b = std::get_if<BernoulliD>(&d))
    return Value::of_bool(rng.uniform01() < b->p);
  if (const auto* p = std::get_if<PoissonD>(&d))
    return Value::of_int(rng.poisson(p->rate));
  if (const auto* u = std::get_if<UniformD>(&d))
    return Value::of_real(rng.uniform(u->lo, u->hi));
  if (const auto* dd = std::get_if<DeltaD>(&d)) return *dd->v;
  if (const auto* c = std::get_if<CategoricalD>(&d)) {
    double u = rng.uniform01();
    double acc = 0.0;
    for (const auto& [v, w] : *c->support) {
      acc += w;
      if (u < acc) return v;
    }
    return c->support->back().first;
  }
  if (const auto* sh = std::get_if<ShuffleD>(&d)) {
    std::vector<Value> items = *sh->items;
    for (size_t i = items.size(); i > 1; --i)
      std::swap(items[i - 1], items[rng.uniform_int(i)]);
    return Value::list(std::move(items));
  }
  const auto& mx = std::get<MixtureD>(d);
  double u = rng.uniform01();
  double acc = 0.0;
  for (const auto& [comp, w] : mx.comps->items) {
    acc += w;
    if (u < acc) return draw(comp, rng);
  }
  return draw(mx.comps->items.back().first, rng);
}

double pdf(const MDistr& d, const Value& v) {
  if (const auto* g = std::get_if<Gaussian>(&d)) {
    double x = as_real(v);
    double z = x - g->mean;
    return std::exp(-z * z / (2.0 * g->var)) / std::sqrt(kTau * g->var);
  }
  if (const auto* b = std::get_if<BetaD>(&d)) {
    double x = as_real(v);
    if (x <= 0.0 || x >= 1.0) return 0.0;
    double lg = std::lgamma(b->a + b->b) - std::lgamma(b->a) - std::lgamma(b->b);
    return std::exp(lg + (b->a - 1.0) * std::log(x) + (b->b - 1.0) * std::log1p(-x));
  }
  if (const auto* b = std::get_if<BernoulliD>(&d))
    return as_bool(v) ? b->p : 1.0 - b->p;
  if (const auto* p = std::get_if<PoissonD>(&d)) {
    long k = as_int(v);
    if (k < 0) return 0.0;
    return std::exp(k * std::log(p->rate) - p->rate - std::lgamma(k + 1.0));
  }
  if (const auto* u = std::get_if<UniformD>(&d)) {
    double x = as_real(v);
    if (x < u->lo || x > u->hi) return 0.0;
    return 1.0 / (u->hi - u->lo);
  }
  if (const auto* dd = std::get_if<DeltaD>(&d)) return value_eq(*dd->v, v) ? 1.0 : 0.0;
  if (const auto* c = std::get_if<CategoricalD>(&d)) {
    double mass = 0.0;
    for (const auto& [x, w] : *c->support)
      if (value_eq(x, v)) mass += w;
    return mass;
  }
  if (const auto* mx = std::get_if<MixtureD>(&d)) {
    double p = 0.0;
    for (const auto& [comp, w] : mx->comps->items) p += w * pdf(comp, v);
    return p;
  }
  throw EvalError("density undefined for a permutation distribution");
}

double dist_mean(const MDistr& d) {
  if (const auto* g = std::get_if<Gaussian>(&d)) return g->mean;
  if (const auto* b = std::get_if<BetaD>(&d)) return b->a / (b->a + b->b);
  if (const auto* b = std::get_if<BernoulliD>(&d)) return b->p;
  if (const auto* p = std::get_if<PoissonD>(&d)) return p->rate;
  if (const auto* u = std::get_if<UniformD>(&d)) return 0.5 * (u->lo + u->hi);
  if (const auto* dd = std::get_if<DeltaD>(&d)) return as_real(*dd->v);
  if (const auto* c = std::get_if<CategoricalD>(&d)) {
    double m = 0.0;
    for (const auto& [x, w] : *c->support) m += w * as_real(x);
    return m;
  }
  if (const auto* mx = std::get_if<MixtureD>(&d)) {
    double m = 0.0;
    for (const auto& [comp, w] : mx->comps->items) m += w * dist_mean(comp);
    return m;
  }
  moment_error(d);
}

double dist_var(const MDistr& d) {
  if (const auto* g = std::get_if<Gaussian>(&d)) return g->var;
  if (const auto* b = std::get_if<BetaD>(&d)) {
    double s = b->a + b->b;
    return b->a * b->b / (s * s * (s + 1.0));
  }
  if (const auto* b = std::get_if<BernoulliD>(&d)) return b->p * (1.0 - b->p);
  if (const auto* p = std::get_if<PoissonD>(&d)) return p->rate;
  if (const auto* u = std::get_if<UniformD>(&d)) {
    double w = u->hi - u->lo;
    return w * w / 12.0;
  }
  if (std::holds_alternative<DeltaD>(d)) return 0.0;
  if (const auto* c = std::get_if<CategoricalD>(&d)) {
    double m = dist_mean(d);
    double s = 0.0;
    for (const auto& [x, w] : *c->support) {
      double z = as_real(x) - m;
      s += w * z * z;
    }
    return s;
  }
  if (const auto* mx = std::get_if<MixtureD>(&d)) {
    // Law of total variance over the components.
    double m = dist_mean(d);
    double s = 0.0;
    for (const auto& [comp, w] : mx->comps->items) {
      double cm = dist_mean(comp);
      s += w * (dist_var(comp) + cm * cm);
    }
    return s - m * m;
  }
  moment_error(d);
}

std::string dist_describe(const MDistr& d) {
  std::ostringstream os;
  if (const auto* g = std::get_if<Gaussian>(&d)) {
    os << "gaussian(" << g->mean << ", " << g->var << ")";
  } else if (const auto* b = std::get_if<BetaD>(&d)) {
    os << "beta(" << b->a << ", " << b->b << ")";
  } else if (const auto* b = std::get_if<BernoulliD>(&d)) {
    os << "bernoulli(" << b->p << ")";
  } else if (const auto* p = std::get_if<PoissonD>(&d)) {
    os << "poisson(" << p->rate << ")";
  } else if (const auto* u = std::get_if<UniformD>(&d)) {
    os << "uniform(" << u->lo << ", " << u->hi << ")";
  } else if (const auto* dd = std::get_if<DeltaD>(&d)) {
    os << "delta(" << value_describe(*dd->v) << ")";
  } else if (const auto* c = std::get_if<CategoricalD>(&d)) {
    os << "categorical(" << c->support->size() << " atoms)";
  } else if (const auto* sh = std::get_if<ShuffleD>(&d)) {
    os << "shuffle(" << sh->items->size() << " items)";
  } else {
    const auto& mx = std::get<MixtureD>(d);
    os << "mixture(" << mx.comps->items.size() << " components)";
  }
  return os.str();
}

bool mdistr_eq(const MDistr& a, const MDistr& b) {
  if (a.index() != b.index()) return false;
  if (const auto* g = std::get_if<Gaussian>(&a)) {
    const auto& h = std::get<Gaussian>(b);
    return g->mean == h.mean && g->var == h.var;
  }
  if (const auto* x = std::get_if<BetaD>(&a)) {
    const auto& y = std::get<BetaD>(b);
    return x->a == y.a && x->b == y.b;
  }
  if (const auto* x = std::get_if<BernoulliD>(&a))
    return x->p == std::get<BernoulliD>(b).p;
  if (const auto* x = std::get_if<PoissonD>(&a))
    return x->rate == std::get<PoissonD>(b).rate;
  if (const auto* x = std::get_if<UniformD>(&a)) {
    const auto& y = std::get<UniformD>(b);
    return x->lo == y.lo && x->hi == y.hi;
  }
  if (const auto* x = std::get_if<DeltaD>(&a))
    return value_eq(*x->v, *std::get<DeltaD>(b).v);
  if (const auto* x = std::get_if<CategoricalD>(&a)) {
    const auto& y = std::get<CategoricalD>(b);
    if (x->support->size() != y.support->size()) return false;
    for (size_t i = 0; i < x->support->size(); ++i) {
      if ((*x->support)[i].second != (*y.support)[i].second) return false;
      if (!value_eq((*x->support)[i].first, (*y.support)[i].first)) return false;
    }
    return true;
  }
  if (const auto* x = std::get_if<ShuffleD>(&a)) {
    const auto& y = std::get<ShuffleD>(b);
    if (x->items->size() != y.items->size()) return false;
    for (size_t i = 0; i < x->items->size(); ++i)
      if (!value_eq((*x->items)[i], (*y.items)[i])) return false;
    return true;
  }
  const auto& x = std::get<MixtureD>(a);
  const auto& y = std::get<MixtureD>(b);
  if (x.comps->items.size() != y.comps->items.size()) return false;
  for (size_t i = 0; i < x.comps->items.size(); ++i) {
    if (x.comps->items[i].second != y.comps->items[i].second) return false;
    if (!mdistr_eq(x.comps->items[i].first, y.comps->items[i].first)) return false;
  }
  return true;
}

MDistr make_mixture(std::vector<std::pair<MDistr, double>> comps) {
  if (comps.empty()) throw EvalError("mixture of no components");
  double total = 0.0;
  for (const auto& [d, w] : comps) total += w;
  if (!(total > 0.0)) throw EvalError("mixture weights sum to zero");
  // Merge structurally identical components, keeping first-seen order.
  std::vector<std::pair<MDistr, double>> merged;
  for (auto& [d, w] : comps) {
    bool found = false;
    for (auto& [md, mw] : merged)
      if (mdistr_eq(d, md)) {
        mw += w;
        found = true;
        break;
      }
    if (!found) merged.emplace_back(std::move(d), w);
  }
  if (merged.size() == 1) return merged.front().first;
  for (auto& [d, w] : merged) w /= total;
  return MixtureD{std::make_shared<const MixtureComps>(MixtureComps{std::move(merged)})};
}

}  // namespace muf
