#include <catch2/catch_amalgamated.hpp>

#include <functional>

#include "muf/parser.hpp"
#include "muf/source.hpp"
#include "muf/types.hpp"

using namespace muf;

namespace {

const char* kFilter = R"(
// scalar filter: latent chain with one observation per step
val f = stream {
  init = 0.0;
  step (pre_x, obs) =
    let x = sample (gaussian (pre_x, 1.0)) in
    let () = observe (gaussian (x, 1.0), obs) in
    (x, x)
}
val main = stream {
  init = infer f;
  step (k, obs) = unfold (k, obs)
}
)";

void typecheck(const std::string& src) {
  Program p = parse_program(src);
  TypeChecker tc(p);
  tc.check();
}

}  // namespace

TEST_CASE("filter program parses and checks") {
  Program p = parse_program(kFilter);
  REQUIRE(p.decls.size() == 2);
  REQUIRE(p.find_stream("main"));

  TypeChecker tc(p);
  tc.check();
  const StreamInfo& info = tc.stream("f");
  CHECK(info.prob);
  CHECK(deref(info.state)->k == TK::Real);
  CHECK(deref(info.in)->k == TK::Real);
  CHECK(deref(info.out)->k == TK::Real);
  const StreamInfo& main = tc.stream("main");
  CHECK_FALSE(main.prob);
  CHECK(deref(main.out)->k == TK::Distr);
}

TEST_CASE("normalization hoists nested arguments into reserved lets") {
  Program p = parse_program(kFilter);
  const StreamDecl* s = p.find_stream("f");
  REQUIRE(s);
  // The sample's argument gets hoisted into a reserved let inside the rhs.
  const auto* let = std::get_if<LetE>(&s->body->e);
  REQUIRE(let);
  const auto* rhs_let = std::get_if<LetE>(&let->rhs->e);
  REQUIRE(rhs_let);
  const auto* pv = std::get_if<PVar>(&rhs_let->pat->p);
  REQUIRE(pv);
  CHECK(pv->name.rfind("%t", 0) == 0);
  CHECK(std::holds_alternative<SampleE>(rhs_let->body->e));

  // Every value position holds a value form after normalization.
  std::function<void(const ExprPtr&)> walk = [&](const ExprPtr& e) {
    if (const auto* sm = std::get_if<SampleE>(&e->e)) {
      CHECK(is_value_expr(*sm->dist));
    } else if (const auto* ob = std::get_if<ObserveE>(&e->e)) {
      CHECK(is_value_expr(*ob->dist));
      CHECK(is_value_expr(*ob->data));
    } else if (const auto* op = std::get_if<OpAppE>(&e->e)) {
      for (const auto& a : op->args) CHECK(is_value_expr(*a));
    } else if (const auto* iff = std::get_if<IfE>(&e->e)) {
      CHECK(is_value_expr(*iff->cond));
      walk(iff->then_e);
      walk(iff->else_e);
      return;
    }
    if (const auto* l = std::get_if<LetE>(&e->e)) {
      walk(l->rhs);
      walk(l->body);
    } else if (const auto* pr = std::get_if<PairE>(&e->e)) {
      walk(pr->fst);
      walk(pr->snd);
    }
  };
  walk(s->body);
}

TEST_CASE("tuple patterns, primes and nested tuples parse") {
  const char* src = R"(
val helper = stream {
  init = (true, 0.0, 0.0);
  step ((first, i, pre_x), obs) =
    let (i, pre_x) = if first then (let i = sample (gaussian (0.0, 1.0)) in (i, i))
                     else (i, pre_x) in
    let x = sample (gaussian (pre_x, 1.0)) in
    let () = observe (gaussian (x, 1.0), obs) in
    (x, (false, i, x))
}
val main = stream {
  init = infer helper;
  step (h, obs) =
    let d, h' = unfold (h, obs) in
    (mean (d), h')
}
)";
  typecheck(src);
}

TEST_CASE("deterministic streams compose with inferred ones") {
  const char* src = R"(
val controller = stream {
  init = ();
  step (c, (target, x)) = (mult (0.5, sub (target, x)), c)
}
val model = stream {
  init = 0.0;
  step (pre_x, obs) =
    let x = sample (gaussian (pre_x, 1.0)) in
    let () = observe (gaussian (x, 1.0), obs) in
    (x, x)
}
val main = stream {
  init = (init controller, infer model);
  step ((c, k), (obs, target)) =
    let x_dist, k' = unfold (k, obs) in
    let u, c' = unfold (c, (target, mean (x_dist))) in
    (u, (c', k'))
}
)";
  Program p = parse_program(src);
  TypeChecker tc(p);
  tc.check();
  const StreamInfo& main = tc.stream("main");
  CHECK_FALSE(main.prob);
  CHECK(deref(main.out)->k == TK::Real);
  const Type* in = deref(main.in);
  REQUIRE(in->k == TK::Prod);
  CHECK(deref(in->a)->k == TK::Real);
  CHECK(deref(in->b)->k == TK::Real);
}

TEST_CASE("int and real stay distinct") {
  CHECK_THROWS_AS(typecheck(R"(
val main = stream { init = 0; step (s, i) = (plus (s, 1.0), s) }
)"),
                  TypeError);
}

TEST_CASE("sample outside inference is rejected") {
  CHECK_THROWS_AS(typecheck(R"(
val main = stream { init = 0.0; step (s, i) = (sample (gaussian (0.0, 1.0)), s) }
)"),
                  TypeError);
}

TEST_CASE("nested inference is rejected") {
  CHECK_THROWS_AS(typecheck(R"(
val inner = stream {
  init = 0.0;
  step (s, i) = (sample (gaussian (s, 1.0)), s)
}
val outer = stream {
  init = 0.0;
  step (s, i) =
    let x = sample (gaussian (s, 1.0)) in
    let k = infer inner in
    (x, s)
}
val main = stream { init = infer outer; step (k, i) = unfold (k, i) }
)"),
                  TypeError);
}

TEST_CASE("entry stream must be deterministic") {
  CHECK_THROWS_AS(typecheck(R"(
val main = stream {
  init = 0.0;
  step (s, i) = (sample (gaussian (s, 1.0)), s)
}
)"),
                  TypeError);
}

TEST_CASE("probabilistic state cannot hold stream instances") {
  CHECK_THROWS_AS(typecheck(R"(
val aux = stream { init = 0.0; step (s, i) = (s, s) }
val bad = stream {
  init = 0.0;
  step (s, i) =
    let inst = init aux in
    (sample (gaussian (s, 1.0)), s)
}
val main = stream { init = infer bad; step (k, i) = unfold (k, i) }
)"),
                  TypeError);
}

TEST_CASE("observe data must match the distribution element type") {
  CHECK_THROWS_AS(typecheck(R"(
val m = stream {
  init = 0.0;
  step (s, i) =
    let () = observe (bernoulli (0.5), 1.0) in
    (s, s)
}
val main = stream { init = infer m; step (k, i) = unfold (k, i) }
)"),
                  TypeError);
}

TEST_CASE("array and list builtins check") {
  const char* src = R"(
val m = stream {
  init = (true, Array.empty);
  step ((first, map), (obs, cmd)) =
    let map = if first then Array.init (10, fun _ -> sample (bernoulli (0.5))) else map in
    let o = Array.get (map, cmd) in
    let () = observe (bernoulli (ite (o, 0.9, 0.1)), obs) in
    (o, (false, map))
}
val main = stream { init = infer m; step (k, i) = unfold (k, i) }
)";
  Program p = parse_program(src);
  TypeChecker tc(p);
  tc.check();
  const StreamInfo& m = tc.stream("m");
  const Type* in = deref(m.in);
  REQUIRE(in->k == TK::Prod);
  CHECK(deref(in->a)->k == TK::Bool);
  CHECK(deref(in->b)->k == TK::Int);
}

TEST_CASE("unknown names and bad arity are parse or type errors") {
  CHECK_THROWS_AS(typecheck("val main = stream { init = 0.0; step (s, i) = (nope, s) }"),
                  TypeError);
  CHECK_THROWS_AS(typecheck("val main = stream { init = 0.0; step (s, i) = (plus (s), s) }"),
                  TypeError);
  CHECK_THROWS_AS(parse_program("val main = stream { init = 0.0 step (s, i) = (s, s) }"),
                  ParseError);
  CHECK_THROWS_AS(parse_program("val x = @"), ParseError);
}

TEST_CASE("negative literals and comments lex") {
  typecheck(R"(
// leading comment
val main = stream {
  init = -1.5; // trailing comment
  step (s, i) = (plus (s, -2.0), s)
}
)");
}

TEST_CASE("block comments lex and nest") {
  typecheck(R"(
(* leading block comment
   spanning (* a nested comment *) two lines *)
val main = stream {
  init = 0.0; (* inline *)
  step (s, i) = (plus (s, i), s)
}
)");
  CHECK_THROWS_AS(parse_program("(* never closed\nval main = 0.0"),
                  ParseError);
}

TEST_CASE("stream used as a plain value is rejected") {
  CHECK_THROWS_AS(typecheck(R"(
val aux = stream { init = 0.0; step (s, i) = (s, s) }
val main = stream { init = 0.0; step (s, i) = (aux, s) }
)"),
                  TypeError);
}
