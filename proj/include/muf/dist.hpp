#pragma once

#include <memory>
#include <utility>
#include <variant>
#include <vector>

#include "muf/rng.hpp"

namespace muf {

struct Value;

// Marginal distributions: what a graph node can carry once its parent
// dependence has been folded away, and what inference results report.
struct Gaussian {
  double mean, var;
};
struct BetaD {
  double a, b;
};
struct BernoulliD {
  double p;
};
struct PoissonD {
  double rate;
};
struct UniformD {
  double lo, hi;
};
// Point mass on an arbitrary runtime value.
struct DeltaD {
  std::shared_ptr<const Value> v;
};
// Finite weighted support; weights sum to 1.
struct CategoricalD {
  std::shared_ptr<const std::vector<std::pair<Value, double>>> support;
};
// Uniform distribution over permutations of a fixed list.
struct ShuffleD {
  std::shared_ptr<const std::vector<Value>> items;
};
// Weighted combination of marginals (what a bank of weighted hypotheses
// reports for one output position). Weights sum to 1.
struct MixtureComps;
struct MixtureD {
  std::shared_ptr<const MixtureComps> comps;
};

using MDistr = std::variant<Gaussian, BetaD, BernoulliD, PoissonD, UniformD,
                            DeltaD, CategoricalD, ShuffleD, MixtureD>;

struct MixtureComps {
  std::vector<std::pair<MDistr, double>> items;
};

// Normalizes the weights and collapses to the single component when all
// components are structurally identical (the exact-inference fast path,
// which keeps closed-form outputs closed-form).
MDistr make_mixture(std::vector<std::pair<MDistr, double>> comps);

// Structural identity of two marginals (parameter-for-parameter).
bool mdistr_eq(const MDistr& a, const MDistr& b);

// Conditional distributions: the child side of an analytic parent-child
// edge. The child is Gaussian with mean affine in the parent, or Bernoulli
// with the parent as its own probability.
struct CGaussianMean {
  double var;
  double scale, shift;  // child mean = scale * parent + shift
};
struct CBernoulli {};

using CDistr = std::variant<CGaussianMean, CBernoulli>;

// Gaussian observation at fixed noise of the parent itself.
inline CDistr cgaussian_obs(double var) { return CGaussianMean{var, 1.0, 0.0}; }

// True when the pair (parent marginal, conditional child) admits exact
// marginalization and conditioning.
bool conjugate(const MDistr& parent, const CDistr& cd);

// Child's marginal under a conjugate parent: integrates the parent out.
MDistr make_marginal(const MDistr& parent, const CDistr& cd);

// Parent's posterior after the conjugate child was observed at `obs`.
MDistr make_conditional(const MDistr& parent, const CDistr& cd, const Value& obs);

// Child's distribution once the parent is a known value.
MDistr cdistr_to_mdistr(const CDistr& cd, const Value& parent_value);

Value draw(const MDistr& d, Rng& rng);

// Density (or mass) of `v` under `d`. Shuffle has no usable density here.
double pdf(const MDistr& d, const Value& v);

// First two moments; EvalError where undefined (Shuffle, non-numeric Delta).
double dist_mean(const MDistr& d);
double dist_var(const MDistr& d);

std::string dist_describe(const MDistr& d);

}  // namespace muf
