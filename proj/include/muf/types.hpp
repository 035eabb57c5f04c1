#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "muf/ast.hpp"

namespace muf {

enum class TK { Unit, Bool, Int, Real, Var, Prod, Fun, Distr, List, Array, Stream };

// Mutable unification node. Var links compress toward the representative.
struct Type {
  TK k;
  // Var
  int var_id = 0;
  bool numeric = false;  // may only resolve to Int or Real
  std::shared_ptr<Type> link;
  // Prod/Fun: a, b; Distr/List/Array: a; Stream: a=in, b=out + prob flag.
  std::shared_ptr<Type> a, b;
  bool prob = false;
};
using TypePtr = std::shared_ptr<Type>;

TypePtr t_unit();
TypePtr t_bool();
TypePtr t_int();
TypePtr t_real();
TypePtr t_prod(TypePtr a, TypePtr b);
TypePtr t_fun(TypePtr a, TypePtr b);
TypePtr t_distr(TypePtr a);
TypePtr t_list(TypePtr a);
TypePtr t_array(TypePtr a);
TypePtr t_stream(TypePtr in, TypePtr out, bool prob);

// Representative of a type after link chasing.
const Type* deref(const TypePtr& t);

std::string type_str(const TypePtr& t);

struct StreamInfo {
  const StreamDecl* decl = nullptr;
  bool prob = false;
  TypePtr state, in, out;
};

// Syntactic effect scan: does the stream body sample or observe, directly
// or through called functions? (What separates the two instance kinds.)
bool stream_has_prob_effect(const Program& prog, const StreamDecl& s);

// Whole-program checker: declaration order, sample/observe only behind an
// inference boundary, no nested inference, measurable types across it.
class TypeChecker {
 public:
  explicit TypeChecker(const Program& prog) : prog_(prog) {}

  // Throws TypeError on rejection. Leaves per-stream info behind.
  void check();

  const StreamInfo& stream(const std::string& name) const;
  const StreamInfo& main_stream() const;

 private:
  friend class CheckerImpl;
  const Program& prog_;
  std::map<std::string, StreamInfo> streams_;
};

}  // namespace muf
