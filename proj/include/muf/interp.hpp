#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "muf/ast.hpp"
#include "muf/ds_graph.hpp"
#include "muf/trace.hpp"
#include "muf/value.hpp"

namespace muf {

// Runtime environments are persistent association lists so closures and
// stream values share tails instead of copying maps.
struct Env {
  std::string name;
  Value v;
  std::shared_ptr<const Env> next;
};
using EnvPtr = std::shared_ptr<const Env>;

EnvPtr env_bind(EnvPtr env, std::string name, Value v);
const Value* env_lookup(const EnvPtr& env, const std::string& name);
EnvPtr env_bind_pattern(EnvPtr env, const Pattern& pat, const Value& v);

// One weighted hypothesis inside an inference instance: its share of the
// program state, its own sampling graph, and the operation trace the
// runtime checkers consume.
struct Particle {
  Value state;
  DSGraph graph;
  Trace trace;
  double weight = 1.0;
  Rng rng{0};  // overwritten with a derived stream at every step
};

// Instance of a probabilistic stream behind an inference boundary. Treated
// as an immutable value: stepping returns a fresh instance, so unfolding
// never mutates the value it was applied to.
struct PInstanceData {
  StreamVal fn;
  std::vector<Particle> particles;
  uint64_t seed = 0;
  uint64_t step = 0;
};

// Every particle's weight came back zero: the observations rule out all
// hypotheses and the filter cannot continue.
struct DegenerateError : Error {
  using Error::Error;
};

// Random variables of `v` not yet realized in `g`: what a forcing
// operation would have to sample.
std::vector<NodeId> free_rvs(const DSGraph& g, const Value& v);

// Replace realized variables by their values and fold symbolic
// applications whose arguments became concrete.
Value resolve_value(const DSGraph& g, const Value& v);

// Marginal distribution of `v` under `g` without mutating `g`: exact along
// conjugate spines and for affine transforms of Gaussians, Monte Carlo on
// anything else.
MDistr value_distribution(const Value& v, const DSGraph& g, Rng rng);

// Structural form of the above: pairs, lists and arrays keep their shape
// and every leaf becomes a first-class distribution value.
Value distribution_value(const Value& v, const DSGraph& g, Rng rng);

struct InterpOptions {
  int particles = 100;
  uint64_t seed = 0;
};

class Interp {
 public:
  explicit Interp(const Program& prog, InterpOptions opt = {});

  // Instantiate a stream declaration: a deterministic instance for
  // deterministic streams, an inference instance (bank of particles) for
  // probabilistic ones.
  Value make_instance(const std::string& stream_name);

  // One transition of an instance value: (output, successor instance).
  std::pair<Value, Value> step_instance(const Value& inst, const Value& input);

  Value eval_det(EnvPtr env, const Expr& e);
  Value eval_prob(Particle& pc, EnvPtr env, const Expr& e);

  const EnvPtr& top_env() const { return top_; }
  const Program& program() const { return prog_; }
  const InterpOptions& options() const { return opt_; }

 private:
  Value eval(Particle* pc, const EnvPtr& env, const Expr& e);
  Value apply_op(Particle* pc, const std::string& op, std::vector<Value> args,
                 const SourceLoc& loc);
  Value call_closure(Particle* pc, const Closure& cl, const Value& arg);

  // Force every free variable of the given values (one trace event covers
  // them all) and return the resolved concrete values.
  std::vector<Value> force_all(Particle& pc, std::vector<Value> vs);

  Value hl_sample(Particle& pc, const Value& dist_v);
  void hl_observe(Particle& pc, const Value& dist_v, const Value& data_v);
  Value hl_value(Particle& pc, const Value& v);

  Value make_pinstance(const StreamVal& fn);
  std::pair<Value, Value> step_pinstance(const PInstanceData& inst, const Value& input);

  const Program& prog_;
  InterpOptions opt_;
  EnvPtr top_;
  std::unordered_map<const StreamDecl*, EnvPtr> decl_envs_;
  uint64_t instance_counter_ = 0;
};

}  // namespace muf
