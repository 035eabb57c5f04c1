#include "muf/types.hpp"

#include <functional>
#include <set>

#include "muf/parser.hpp"

namespace muf {

namespace {

TypePtr mk(TK k) {
  auto t = std::make_shared<Type>();
  t->k = k;
  return t;
}

// Does this expression perform a probabilistic effect, directly or through
// called functions?
bool expr_has_prob_effect(const Program& prog, const ExprPtr& e,
                          std::set<std::string>& seen) {
  bool found = false;
  std::function<void(const ExprPtr&)> walk = [&](const ExprPtr& x) {
    if (found) return;
    if (std::holds_alternative<SampleE>(x->e) ||
        std::holds_alternative<ObserveE>(x->e)) {
      found = true;
      return;
    }
    if (const auto* f = std::get_if<FunAppE>(&x->e)) {
      if (seen.insert(f->fn).second) {
        if (const auto* fd = prog.find_fun(f->fn))
          if (expr_has_prob_effect(prog, fd->body, seen)) found = true;
      }
      walk(f->arg);
      return;
    }
    if (const auto* p = std::get_if<PairE>(&x->e)) { walk(p->fst); walk(p->snd); return; }
    if (const auto* op = std::get_if<OpAppE>(&x->e)) {
      for (const auto& a : op->args) walk(a);
      return;
    }
    if (const auto* i = std::get_if<IfE>(&x->e)) { walk(i->cond); walk(i->then_e); walk(i->else_e); return; }
    if (const auto* l = std::get_if<LetE>(&x->e)) { walk(l->rhs); walk(l->body); return; }
    if (const auto* u = std::get_if<UnfoldE>(&x->e)) { walk(u->inst); walk(u->arg); return; }
    if (const auto* lam = std::get_if<LambdaE>(&x->e)) { walk(lam->body); return; }
  };
  walk(e);
  return found;
}

}  // namespace

bool stream_has_prob_effect(const Program& prog, const StreamDecl& s) {
  std::set<std::string> seen;
  return expr_has_prob_effect(prog, s.body, seen);
}

TypePtr t_unit() { return mk(TK::Unit); }
TypePtr t_bool() { return mk(TK::Bool); }
TypePtr t_int() { return mk(TK::Int); }
TypePtr t_real() { return mk(TK::Real); }
TypePtr t_prod(TypePtr a, TypePtr b) {
  auto t = mk(TK::Prod);
  t->a = std::move(a);
  t->b = std::move(b);
  return t;
}
TypePtr t_fun(TypePtr a, TypePtr b) {
  auto t = mk(TK::Fun);
  t->a = std::move(a);
  t->b = std::move(b);
  return t;
}
TypePtr t_distr(TypePtr a) {
  auto t = mk(TK::Distr);
  t->a = std::move(a);
  return t;
}
TypePtr t_list(TypePtr a) {
  auto t = mk(TK::List);
  t->a = std::move(a);
  return t;
}
TypePtr t_array(TypePtr a) {
  auto t = mk(TK::Array);
  t->a = std::move(a);
  return t;
}
TypePtr t_stream(TypePtr in, TypePtr out, bool prob) {
  auto t = mk(TK::Stream);
  t->a = std::move(in);
  t->b = std::move(out);
  t->prob = prob;
  return t;
}

const Type* deref(const TypePtr& t) {
  const Type* cur = t.get();
  while (cur->k == TK::Var && cur->link) cur = cur->link.get();
  return cur;
}

std::string type_str(const TypePtr& t) {
  const Type* r = deref(t);
  switch (r->k) {
    case TK::Unit: return "unit";
    case TK::Bool: return "bool";
    case TK::Int: return "int";
    case TK::Real: return "real";
    case TK::Var: return r->numeric ? "'num" : "'a";
    case TK::Prod: return "(" + type_str(r->a) + " * " + type_str(r->b) + ")";
    case TK::Fun: return "(" + type_str(r->a) + " -> " + type_str(r->b) + ")";
    case TK::Distr: return "distr(" + type_str(r->a) + ")";
    case TK::List: return "list(" + type_str(r->a) + ")";
    case TK::Array: return "array(" + type_str(r->a) + ")";
    case TK::Stream:
      return std::string(r->prob ? "pstream" : "stream") + "(" + type_str(r->a) +
             ", " + type_str(r->b) + ")";
  }
  return "?";
}

namespace {

using Env = std::map<std::string, TypePtr>;

struct FunSig {
  const FunDecl* decl;
  bool prob;
  TypePtr param, result;
};

class Checker {
 public:
  Checker(const Program& prog, std::map<std::string, StreamInfo>& streams)
      : prog_(prog), streams_(streams) {}

  void run() {
    for (const auto& d : prog_.decls) {
      if (const auto* v = std::get_if<ValDecl>(&d)) {
        TypePtr t = infer(globals_, v->rhs, false);
        bind_pattern(globals_, v->pat, t);
      } else if (const auto* f = std::get_if<FunDecl>(&d)) {
        check_fun(*f);
      } else if (const auto* s = std::get_if<StreamDecl>(&d)) {
        check_stream(*s);
      }
    }
    const StreamDecl* main = prog_.find_stream(prog_.entry);
    if (!main) throw TypeError({}, "no stream named '" + prog_.entry + "'");
    if (streams_.at(prog_.entry).prob)
      throw TypeError(main->loc,
                      "the entry stream must be deterministic (wrap inference "
                      "with infer inside it)");
    default_numeric_vars();
  }

 private:
  TypePtr fresh(bool numeric = false) {
    auto t = mk(TK::Var);
    t->var_id = ++var_counter_;
    t->numeric = numeric;
    all_vars_.push_back(t);
    return t;
  }

  [[noreturn]] void fail(const SourceLoc& loc, const std::string& msg) {
    throw TypeError(loc, msg);
  }

  static TypePtr repr(TypePtr t) {
    while (t->k == TK::Var && t->link) t = t->link;
    return t;
  }

  bool occurs(const Type* var, const TypePtr& t) {
    TypePtr r = repr(t);
    if (r.get() == var) return true;
    for (const TypePtr* part : {&r->a, &r->b})
      if (*part && occurs(var, *part)) return true;
    return false;
  }

  void unify(const TypePtr& ta, const TypePtr& tb, const SourceLoc& loc) {
    TypePtr x = repr(ta), y = repr(tb);
    if (x.get() == y.get()) return;
    if (y->k == TK::Var && x->k != TK::Var) std::swap(x, y);
    if (x->k == TK::Var) {
      if (y->k == TK::Var) {
        if (x->numeric) y->numeric = true;
        x->link = y;
        return;
      }
      if (x->numeric && !(y->k == TK::Int || y->k == TK::Real))
        fail(loc, "numeric type expected, got " + type_str(tb));
      if (occurs(x.get(), y)) fail(loc, "cannot construct an infinite type");
      x->link = y;
      return;
    }
    if (x->k != y->k) fail(loc, "type mismatch: " + type_str(ta) + " vs " + type_str(tb));
    switch (x->k) {
      case TK::Prod:
      case TK::Fun:
        unify(x->a, y->a, loc);
        unify(x->b, y->b, loc);
        return;
      case TK::Distr:
      case TK::List:
      case TK::Array:
        unify(x->a, y->a, loc);
        return;
      case TK::Stream:
        if (x->prob != y->prob)
          fail(loc, "type mismatch: " + type_str(ta) + " vs " + type_str(tb));
        unify(x->a, y->a, loc);
        unify(x->b, y->b, loc);
        return;
      default:
        return;  // identical base kinds
    }
  }

  void bind_pattern(Env& env, const PatternPtr& pat, const TypePtr& t) {
    if (const auto* v = std::get_if<PVar>(&pat->p)) {
      env[v->name] = t;
      return;
    }
    if (std::get_if<PWild>(&pat->p)) return;
    if (std::get_if<PUnit>(&pat->p)) {
      unify(t, t_unit(), pat->loc);
      return;
    }
    const auto& tup = std::get<PTuple>(pat->p);
    // (p1, ..., pn) binds against right-nested pairs.
    TypePtr rest = t;
    for (size_t i = 0; i + 1 < tup.parts.size(); ++i) {
      TypePtr head = fresh(), tail = fresh();
      unify(rest, t_prod(head, tail), pat->loc);
      bind_pattern(env, tup.parts[i], head);
      rest = tail;
    }
    bind_pattern(env, tup.parts.back(), rest);
  }

  bool has_prob_effect(const ExprPtr& e, std::set<std::string>& seen) {
    return expr_has_prob_effect(prog_, e, seen);
  }

  void check_fun(const FunDecl& f) {
    std::set<std::string> seen{f.name};
    FunSig sig;
    sig.decl = &f;
    sig.prob = has_prob_effect(f.body, seen);
    sig.param = fresh();
    Env env = globals_;
    bind_pattern(env, f.param, sig.param);
    sig.result = infer(env, f.body, sig.prob);
    funs_[f.name] = sig;
  }

  void check_stream(const StreamDecl& s) {
    StreamInfo info;
    info.decl = &s;
    std::set<std::string> seen;
    info.prob = has_prob_effect(s.body, seen);
    info.state = infer(globals_, s.init, false);
    info.in = fresh();
    info.out = fresh();
    Env env = globals_;
    bind_pattern(env, s.p_state, info.state);
    bind_pattern(env, s.p_in, info.in);
    TypePtr body_t = infer(env, s.body, info.prob);
    unify(body_t, t_prod(info.out, info.state), s.body->loc);
    if (info.prob) {
      require_measurable(info.state, s.loc, "state");
      require_measurable(info.in, s.loc, "input");
      require_measurable(info.out, s.loc, "output");
    }
    streams_[s.name] = info;
  }

  // Data only: nothing function- or stream-typed may cross an inference
  // boundary or live in a probabilistic state.
  void require_measurable(const TypePtr& t, const SourceLoc& loc, const char* what) {
    const Type* r = deref(t);
    switch (r->k) {
      case TK::Fun:
      case TK::Stream:
        fail(loc, std::string("the ") + what +
                      " of a probabilistic stream must be a data type, got " +
                      type_str(t));
      case TK::Prod:
        require_measurable(r->a, loc, what);
        require_measurable(r->b, loc, what);
        return;
      case TK::Distr:
      case TK::List:
      case TK::Array:
        require_measurable(r->a, loc, what);
        return;
      default:
        return;
    }
  }

  TypePtr op_type(const OpAppE& op, const SourceLoc& loc, Env& env, bool prob) {
    auto arity = [&](size_t n) {
      if (op.args.size() != n)
        fail(loc, op.op + " expects " + std::to_string(n) + " arguments");
    };
    auto arg = [&](size_t i) { return infer(env, op.args[i], prob); };

    const std::string& o = op.op;
    if (o == "plus" || o == "sub" || o == "mult" || o == "div") {
      arity(2);
      TypePtr n = fresh(true);
      unify(arg(0), n, loc);
      unify(arg(1), n, loc);
      return n;
    }
    if (o == "lt") {
      arity(2);
      TypePtr n = fresh(true);
      unify(arg(0), n, loc);
      unify(arg(1), n, loc);
      return t_bool();
    }
    if (o == "eq") {
      arity(2);
      TypePtr a = fresh();
      unify(arg(0), a, loc);
      unify(arg(1), a, loc);
      return t_bool();
    }
    if (o == "not") {
      arity(1);
      unify(arg(0), t_bool(), loc);
      return t_bool();
    }
    if (o == "ite") {
      arity(3);
      unify(arg(0), t_bool(), loc);
      TypePtr a = fresh();
      unify(arg(1), a, loc);
      unify(arg(2), a, loc);
      return a;
    }
    if (o == "mean") {
      arity(1);
      TypePtr a = fresh();
      unify(arg(0), t_distr(a), loc);
      return t_real();
    }
    if (o == "eval") {
      arity(1);
      return arg(0);
    }
    if (o == "gaussian" || o == "beta" || o == "uniform") {
      arity(2);
      unify(arg(0), t_real(), loc);
      unify(arg(1), t_real(), loc);
      return t_distr(t_real());
    }
    if (o == "bernoulli") {
      arity(1);
      unify(arg(0), t_real(), loc);
      return t_distr(t_bool());
    }
    if (o == "poisson") {
      arity(1);
      unify(arg(0), t_real(), loc);
      return t_distr(t_int());
    }
    if (o == "shuffle") {
      arity(1);
      TypePtr a = fresh();
      unify(arg(0), t_list(a), loc);
      return t_distr(t_list(a));
    }
    if (o == "List.nil") {
      arity(0);
      return t_list(fresh());
    }
    if (o == "List.init") {
      arity(2);
      unify(arg(0), t_int(), loc);
      TypePtr a = fresh();
      unify(arg(1), t_fun(t_int(), a), loc);
      return t_list(a);
    }
    if (o == "List.map") {
      arity(2);
      TypePtr a = fresh(), b = fresh();
      unify(arg(0), t_fun(a, b), loc);
      unify(arg(1), t_list(a), loc);
      return t_list(b);
    }
    if (o == "List.filter") {
      arity(2);
      TypePtr a = fresh();
      unify(arg(0), t_fun(a, t_bool()), loc);
      unify(arg(1), t_list(a), loc);
      return t_list(a);
    }
    if (o == "List.append") {
      arity(2);
      TypePtr a = t_list(fresh());
      unify(arg(0), a, loc);
      unify(arg(1), a, loc);
      return a;
    }
    if (o == "List.length") {
      arity(1);
      unify(arg(0), t_list(fresh()), loc);
      return t_int();
    }
    if (o == "List.iter2") {
      arity(3);
      TypePtr a = fresh(), b = fresh();
      unify(arg(0), t_fun(t_prod(a, b), t_unit()), loc);
      unify(arg(1), t_list(a), loc);
      unify(arg(2), t_list(b), loc);
      return t_unit();
    }
    if (o == "Array.empty") {
      arity(0);
      return t_array(fresh());
    }
    if (o == "Array.init") {
      arity(2);
      unify(arg(0), t_int(), loc);
      TypePtr a = fresh();
      unify(arg(1), t_fun(t_int(), a), loc);
      return t_array(a);
    }
    if (o == "Array.get") {
      arity(2);
      TypePtr a = fresh();
      unify(arg(0), t_array(a), loc);
      unify(arg(1), t_int(), loc);
      return a;
    }
    fail(loc, "unknown operator " + o);
  }

  TypePtr infer(Env& env, const ExprPtr& e, bool prob) {
    const SourceLoc& loc = e->loc;
    if (const auto* c = std::get_if<ConstE>(&e->e)) {
      if (c->v.is_unit()) return t_unit();
      if (c->v.get_if<bool>()) return t_bool();
      if (c->v.get_if<long>()) return t_int();
      if (c->v.get_if<double>()) return t_real();
      fail(loc, "unsupported literal");
    }
    if (const auto* v = std::get_if<VarE>(&e->e)) {
      auto it = env.find(v->name);
      if (it == env.end()) {
        if (prog_.find_stream(v->name))
          fail(loc, "stream function '" + v->name +
                        "' can only be used with init or infer");
        fail(loc, "unbound variable '" + v->name + "'");
      }
      return it->second;
    }
    if (const auto* p = std::get_if<PairE>(&e->e))
      return t_prod(infer(env, p->fst, prob), infer(env, p->snd, prob));
    if (const auto* op = std::get_if<OpAppE>(&e->e)) return op_type(*op, loc, env, prob);
    if (const auto* f = std::get_if<FunAppE>(&e->e)) {
      auto it = funs_.find(f->fn);
      if (it == funs_.end()) fail(loc, "unknown function '" + f->fn + "'");
      if (it->second.prob && !prob)
        fail(loc, "function '" + f->fn +
                      "' has probabilistic effects and needs an inference context");
      TypePtr at = infer(env, f->arg, prob);
      unify(at, it->second.param, loc);
      return it->second.result;
    }
    if (const auto* i = std::get_if<IfE>(&e->e)) {
      unify(infer(env, i->cond, prob), t_bool(), loc);
      TypePtr t1 = infer(env, i->then_e, prob);
      TypePtr t2 = infer(env, i->else_e, prob);
      unify(t1, t2, loc);
      return t1;
    }
    if (const auto* l = std::get_if<LetE>(&e->e)) {
      TypePtr rhs = infer(env, l->rhs, prob);
      Env inner = env;
      bind_pattern(inner, l->pat, rhs);
      return infer(inner, l->body, prob);
    }
    if (const auto* ini = std::get_if<InitE>(&e->e)) {
      if (prob) fail(loc, "init is not available inside a probabilistic step");
      auto it = streams_.find(ini->stream);
      if (it == streams_.end()) fail(loc, "unknown stream '" + ini->stream + "'");
      if (it->second.prob)
        fail(loc, "probabilistic stream '" + ini->stream + "' needs infer");
      return t_stream(it->second.in, it->second.out, false);
    }
    if (const auto* inf = std::get_if<InferE>(&e->e)) {
      if (prob) fail(loc, "nested inference is not allowed");
      auto it = streams_.find(inf->stream);
      if (it == streams_.end()) fail(loc, "unknown stream '" + inf->stream + "'");
      if (!it->second.prob)
        fail(loc, "infer expects a probabilistic stream, '" + inf->stream +
                      "' is deterministic");
      return t_stream(it->second.in, it->second.out, true);
    }
    if (const auto* u = std::get_if<UnfoldE>(&e->e)) {
      TypePtr in = fresh(), out = fresh();
      TypePtr inst = infer(env, u->inst, prob);
      const Type* r = deref(inst);
      if (r->k != TK::Stream) fail(loc, "unfold expects a stream instance");
      unify(inst, t_stream(in, out, r->prob), loc);
      unify(infer(env, u->arg, prob), in, loc);
      TypePtr elem = r->prob ? t_distr(out) : out;
      return t_prod(elem, inst);
    }
    if (const auto* s = std::get_if<SampleE>(&e->e)) {
      if (!prob) fail(loc, "sample is only available inside inference");
      TypePtr a = fresh();
      unify(infer(env, s->dist, prob), t_distr(a), loc);
      return a;
    }
    if (const auto* o = std::get_if<ObserveE>(&e->e)) {
      if (!prob) fail(loc, "observe is only available inside inference");
      TypePtr a = fresh();
      unify(infer(env, o->dist, prob), t_distr(a), loc);
      unify(infer(env, o->data, prob), a, loc);
      return t_unit();
    }
    const auto& lam = std::get<LambdaE>(e->e);
    TypePtr pt = fresh();
    Env inner = env;
    bind_pattern(inner, lam.param, pt);
    TypePtr rt = infer(inner, lam.body, prob);
    return t_fun(pt, rt);
  }

  void default_numeric_vars() {
    for (auto& v : all_vars_) {
      Type* r = const_cast<Type*>(deref(v));
      if (r->k == TK::Var) r->link = t_real();
    }
  }

  const Program& prog_;
  std::map<std::string, StreamInfo>& streams_;
  Env globals_;
  std::map<std::string, FunSig> funs_;
  std::vector<TypePtr> all_vars_;
  int var_counter_ = 0;
};

}  // namespace

void TypeChecker::check() {
  Checker c(prog_, streams_);
  c.run();
}

const StreamInfo& TypeChecker::stream(const std::string& name) const {
  auto it = streams_.find(name);
  if (it == streams_.end()) throw Error("no stream info for " + name);
  return it->second;
}

const StreamInfo& TypeChecker::main_stream() const { return stream(prog_.entry); }

}  // namespace muf
