#pragma once

#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "muf/source.hpp"
#include "muf/value.hpp"

namespace muf {

struct Pattern;
using PatternPtr = std::shared_ptr<const Pattern>;

struct PVar {
  std::string name;
};
struct PWild {};
struct PUnit {};
struct PTuple {
  std::vector<PatternPtr> parts;  // right-nested at binding time
};

struct Pattern {
  std::variant<PVar, PWild, PUnit, PTuple> p;
  SourceLoc loc;
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct ConstE {
  Value v;  // unit, bool, int or real literal
};
struct VarE {
  std::string name;
};
struct PairE {
  ExprPtr fst, snd;
};
// Builtin operator application (arithmetic, distributions, containers).
struct OpAppE {
  std::string op;
  std::vector<ExprPtr> args;
};
// Call of a user-defined function.
struct FunAppE {
  std::string fn;
  ExprPtr arg;
};
struct IfE {
  ExprPtr cond, then_e, else_e;
};
struct LetE {
  PatternPtr pat;
  ExprPtr rhs, body;
};
// Instantiate a deterministic stream function by name.
struct InitE {
  std::string stream;
};
struct UnfoldE {
  ExprPtr inst, arg;
};
struct SampleE {
  ExprPtr dist;
};
struct ObserveE {
  ExprPtr dist, data;
};
// Instantiate a probabilistic stream behind an inference boundary.
struct InferE {
  std::string stream;
};
struct LambdaE {
  PatternPtr param;
  ExprPtr body;
};

struct Expr {
  std::variant<ConstE, VarE, PairE, OpAppE, FunAppE, IfE, LetE, InitE, UnfoldE,
               SampleE, ObserveE, InferE, LambdaE>
      e;
  SourceLoc loc;
};

struct StreamDecl {
  std::string name;
  ExprPtr init;
  PatternPtr p_state, p_in;
  ExprPtr body;  // evaluates to (output, new state)
  SourceLoc loc;
};

struct FunDecl {
  std::string name;
  PatternPtr param;
  ExprPtr body;
  SourceLoc loc;
};

struct ValDecl {
  PatternPtr pat;
  ExprPtr rhs;
  SourceLoc loc;
};

struct Program {
  std::vector<std::variant<ValDecl, FunDecl, StreamDecl>> decls;
  std::string entry = "main";

  const StreamDecl* find_stream(const std::string& name) const {
    for (const auto& d : decls)
      if (const auto* s = std::get_if<StreamDecl>(&d))
        if (s->name == name) return s;
    return nullptr;
  }
  const FunDecl* find_fun(const std::string& name) const {
    for (const auto& d : decls)
      if (const auto* f = std::get_if<FunDecl>(&d))
        if (f->name == name) return f;
    return nullptr;
  }
};

// True for the kernel grammar's value forms: constants, variables, pairs of
// values, and function literals (which only ever feed builtin arguments).
bool is_value_expr(const Expr& e);

template <class T>
ExprPtr mk_expr(T node, SourceLoc loc = {}) {
  return std::make_shared<const Expr>(Expr{std::move(node), loc});
}
template <class T>
PatternPtr mk_pat(T node, SourceLoc loc = {}) {
  return std::make_shared<const Pattern>(Pattern{std::move(node), loc});
}

}  // namespace muf
