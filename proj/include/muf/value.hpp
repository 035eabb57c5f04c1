#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "muf/dist.hpp"

namespace muf {

using NodeId = uint32_t;

struct Expr;
struct Pattern;
struct StreamDecl;
struct Env;
struct PInstanceData;

struct UnitV {};

// Reference to a random variable node in a particle's sampling graph.
struct RV {
  NodeId id;
};

struct PairV;
struct SymApp;
struct ListV;
struct ArrayV;
struct DInstance;

// First-class distribution value (what crosses an inference boundary and
// what fully-applied distribution constructors evaluate to).
struct DistVal {
  MDistr d;
};

// A function literal or defined function, closed over its environment.
struct Closure {
  const Pattern* param;
  const Expr* body;
  std::shared_ptr<const Env> env;
};

// A stream function (not yet instantiated).
struct StreamVal {
  const StreamDecl* decl;
  std::shared_ptr<const Env> env;
};

struct Value {
  using Rep = std::variant<UnitV, bool, long, double, RV,
                           std::shared_ptr<const PairV>,
                           std::shared_ptr<const SymApp>, DistVal,
                           std::shared_ptr<const ListV>,
                           std::shared_ptr<const ArrayV>, Closure, StreamVal,
                           std::shared_ptr<const DInstance>,
                           std::shared_ptr<const PInstanceData>>;
  Rep rep;

  Value() : rep(UnitV{}) {}
  template <class T,
            class = std::enable_if_t<!std::is_same_v<std::decay_t<T>, Value>>>
  explicit Value(T&& t) : rep(std::forward<T>(t)) {}

  static Value unit() { return Value(); }
  static Value of_bool(bool b) { return Value(b); }
  static Value of_int(long n) { return Value(n); }
  static Value of_real(double x) { return Value(x); }
  static Value rv(NodeId id) { return Value(RV{id}); }
  static Value dist(MDistr d) { return Value(DistVal{std::move(d)}); }
  static Value pair(Value a, Value b);
  static Value list(std::vector<Value> items);
  static Value array(std::vector<Value> items);
  static Value sym(std::string op, std::vector<Value> args);

  template <class T>
  const T* get_if() const {
    return std::get_if<T>(&rep);
  }
  bool is_unit() const { return std::holds_alternative<UnitV>(rep); }
};

struct PairV {
  Value fst, snd;
};
// Deferred operator application over values that still mention random
// variables (kept symbolic until something forces them).
struct SymApp {
  std::string op;
  std::vector<Value> args;
};
struct ListV {
  std::vector<Value> items;
};
struct ArrayV {
  std::vector<Value> items;
};
// Instance of a deterministic stream: current state plus transition.
struct DInstance {
  Value state;
  StreamVal fn;
};

inline Value Value::pair(Value a, Value b) {
  return Value(std::make_shared<const PairV>(PairV{std::move(a), std::move(b)}));
}
inline Value Value::list(std::vector<Value> items) {
  return Value(std::make_shared<const ListV>(ListV{std::move(items)}));
}
inline Value Value::array(std::vector<Value> items) {
  return Value(std::make_shared<const ArrayV>(ArrayV{std::move(items)}));
}
inline Value Value::sym(std::string op, std::vector<Value> args) {
  return Value(std::make_shared<const SymApp>(SymApp{std::move(op), std::move(args)}));
}

// All node ids mentioned by a value, in first-occurrence order (pairs,
// symbolic applications, lists and arrays are traversed; distribution
// values are closed by construction).
std::vector<NodeId> collect_rvs(const Value& v);

// Structural equality over concrete values; false on anything symbolic.
bool value_eq(const Value& a, const Value& b);

// Numeric view. EvalError if the value is not a number.
double as_real(const Value& v);
long as_int(const Value& v);
bool as_bool(const Value& v);

std::string value_describe(const Value& v);

}  // namespace muf
