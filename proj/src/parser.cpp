#include "muf/parser.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace muf {

namespace {

enum class Tok {
  Ident, Int, Real, LParen, RParen, LBrace, RBrace, Comma, Semi, Eq, Arrow,
  Underscore, KwVal, KwFun, KwStream, KwInit, KwStep, KwLet, KwIn, KwIf,
  KwThen, KwElse, KwTrue, KwFalse, KwSample, KwObserve, KwInfer, KwUnfold, End
};

struct Token {
  Tok kind;
  std::string text;
  long ival = 0;
  double rval = 0.0;
  SourceLoc loc;
};

const std::set<std::string>& builtin_ops() {
  static const std::set<std::string> ops = {
      "plus",        "sub",        "mult",        "div",        "lt",
      "eq",          "not",        "ite",         "mean",       "eval",
      "gaussian",    "beta",       "bernoulli",   "poisson",    "uniform",
      "shuffle",     "List.nil",   "List.init",   "List.map",   "List.filter",
      "List.append", "List.length", "List.iter2", "Array.empty", "Array.init",
      "Array.get"};
  return ops;
}

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_ws();
      SourceLoc loc{line_, col_};
      if (pos_ >= src_.size()) {
        out.push_back({Tok::End, "", 0, 0.0, loc});
        return out;
      }
      char c = src_[pos_];
      if (std::isalpha(static_cast<unsigned char>(c))) {
        out.push_back(ident(loc));
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        out.push_back(number(loc, false));
      } else if (c == '-' && pos_ + 1 < src_.size() &&
                 (std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])) ||
                  src_[pos_ + 1] == '.')) {
        advance();
        out.push_back(number(loc, true));
      } else if (c == '-' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '>') {
        advance();
        advance();
        out.push_back({Tok::Arrow, "->", 0, 0.0, loc});
      } else {
        advance();
        switch (c) {
          case '(': out.push_back({Tok::LParen, "(", 0, 0.0, loc}); break;
          case ')': out.push_back({Tok::RParen, ")", 0, 0.0, loc}); break;
          case '{': out.push_back({Tok::LBrace, "{", 0, 0.0, loc}); break;
          case '}': out.push_back({Tok::RBrace, "}", 0, 0.0, loc}); break;
          case ',': out.push_back({Tok::Comma, ",", 0, 0.0, loc}); break;
          case ';': out.push_back({Tok::Semi, ";", 0, 0.0, loc}); break;
          case '=': out.push_back({Tok::Eq, "=", 0, 0.0, loc}); break;
          case '_': out.push_back({Tok::Underscore, "_", 0, 0.0, loc}); break;
          default:
            throw ParseError(loc, std::string("unexpected character '") + c + "'");
        }
      }
    }
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_ws() {
    for (;;) {
      while (pos_ < src_.size() &&
             std::isspace(static_cast<unsigned char>(src_[pos_])))
        advance();
      if (pos_ + 1 < src_.size() && src_[pos_] == '/' && src_[pos_ + 1] == '/') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
        continue;
      }
      if (pos_ + 1 < src_.size() && src_[pos_] == '(' && src_[pos_ + 1] == '*') {
        SourceLoc open{line_, col_};
        advance();
        advance();
        int depth = 1;
        while (pos_ < src_.size() && depth > 0) {
          if (pos_ + 1 < src_.size() && src_[pos_] == '(' &&
              src_[pos_ + 1] == '*') {
            advance();
            advance();
            ++depth;
          } else if (pos_ + 1 < src_.size() && src_[pos_] == '*' &&
                     src_[pos_ + 1] == ')') {
            advance();
            advance();
            --depth;
          } else {
            advance();
          }
        }
        if (depth > 0) throw ParseError(open, "unterminated comment");
        continue;
      }
      return;
    }
  }

  Token ident(SourceLoc loc) {
    std::string s;
    auto word_char = [&](char c) {
      return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'';
    };
    while (pos_ < src_.size() && word_char(src_[pos_])) {
      s += src_[pos_];
      advance();
    }
    // Dotted builtin segments (List.init, Array.get).
    while (pos_ + 1 < src_.size() && src_[pos_] == '.' &&
           std::isalpha(static_cast<unsigned char>(src_[pos_ + 1]))) {
      s += '.';
      advance();
      while (pos_ < src_.size() && word_char(src_[pos_])) {
        s += src_[pos_];
        advance();
      }
    }
    static const std::set<std::string> kws = {
        "val",  "fun",  "stream", "init",    "step",    "let",   "in",
        "if",   "then", "else",   "true",    "false",   "sample", "observe",
        "infer", "unfold"};
    if (kws.count(s)) {
      Tok k = Tok::Ident;
      if (s == "val") k = Tok::KwVal;
      else if (s == "fun") k = Tok::KwFun;
      else if (s == "stream") k = Tok::KwStream;
      else if (s == "init") k = Tok::KwInit;
      else if (s == "step") k = Tok::KwStep;
      else if (s == "let") k = Tok::KwLet;
      else if (s == "in") k = Tok::KwIn;
      else if (s == "if") k = Tok::KwIf;
      else if (s == "then") k = Tok::KwThen;
      else if (s == "else") k = Tok::KwElse;
      else if (s == "true") k = Tok::KwTrue;
      else if (s == "false") k = Tok::KwFalse;
      else if (s == "sample") k = Tok::KwSample;
      else if (s == "observe") k = Tok::KwObserve;
      else if (s == "infer") k = Tok::KwInfer;
      else if (s == "unfold") k = Tok::KwUnfold;
      return {k, s, 0, 0.0, loc};
    }
    return {Tok::Ident, s, 0, 0.0, loc};
  }

  Token number(SourceLoc loc, bool neg) {
    std::string s;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
      s += src_[pos_];
      advance();
    }
    bool real = false;
    // A trailing dot makes a real literal; don't eat dotted identifiers.
    if (pos_ < src_.size() && src_[pos_] == '.' &&
        !(pos_ + 1 < src_.size() &&
          std::isalpha(static_cast<unsigned char>(src_[pos_ + 1])))) {
      real = true;
      s += '.';
      advance();
      while (pos_ < src_.size() &&
             std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        s += src_[pos_];
        advance();
      }
    }
    if (real) {
      double v = std::stod(s);
      return {Tok::Real, s, 0, neg ? -v : v, loc};
    }
    long v = std::stol(s);
    return {Tok::Int, s, neg ? -v : v, 0.0, loc};
  }

  const std::string& src_;
  size_t pos_ = 0;
  uint32_t line_ = 1, col_ = 1;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  Program program() {
    Program prog;
    while (peek().kind != Tok::End) prog.decls.push_back(decl());
    return prog;
  }

 private:
  const Token& peek(size_t ahead = 0) const {
    size_t i = pos_ + ahead;
    return i < toks_.size() ? toks_[i] : toks_.back();
  }
  Token next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
  Token expect(Tok k, const std::string& what) {
    if (peek().kind != k)
      throw ParseError(peek().loc, "expected " + what + ", got '" + peek().text + "'");
    return next();
  }
  bool accept(Tok k) {
    if (peek().kind != k) return false;
    next();
    return true;
  }

  std::variant<ValDecl, FunDecl, StreamDecl> decl() {
    SourceLoc loc = peek().loc;
    if (accept(Tok::KwVal)) {
      PatternPtr pat = pattern();
      expect(Tok::Eq, "'='");
      if (peek().kind == Tok::KwStream) {
        const auto* pv = std::get_if<PVar>(&pat->p);
        if (!pv) throw ParseError(loc, "a stream must be bound to a plain name");
        StreamDecl s = stream_decl(pv->name);
        s.loc = loc;
        return s;
      }
      return ValDecl{pat, expr(), loc};
    }
    if (accept(Tok::KwFun)) {
      std::string name = expect(Tok::Ident, "function name").text;
      PatternPtr param = pattern_atom();
      expect(Tok::Eq, "'='");
      return FunDecl{name, param, expr(), loc};
    }
    throw ParseError(loc, "expected a declaration");
  }

  StreamDecl stream_decl(const std::string& name) {
    expect(Tok::KwStream, "'stream'");
    expect(Tok::LBrace, "'{'");
    expect(Tok::KwInit, "'init'");
    expect(Tok::Eq, "'='");
    ExprPtr init = expr();
    expect(Tok::Semi, "';'");
    expect(Tok::KwStep, "'step'");
    SourceLoc hdr = peek().loc;
    expect(Tok::LParen, "'('");
    std::vector<PatternPtr> parts;
    parts.push_back(pattern_atom());
    while (accept(Tok::Comma)) parts.push_back(pattern_atom());
    expect(Tok::RParen, "')'");
    if (parts.size() != 2)
      throw ParseError(hdr, "step header takes exactly (state, input)");
    expect(Tok::Eq, "'='");
    ExprPtr body = expr();
    accept(Tok::Semi);
    expect(Tok::RBrace, "'}'");
    return StreamDecl{name, init, parts[0], parts[1], body, {}};
  }

  PatternPtr pattern() {
    SourceLoc loc = peek().loc;
    std::vector<PatternPtr> parts;
    parts.push_back(pattern_atom());
    while (accept(Tok::Comma)) parts.push_back(pattern_atom());
    if (parts.size() == 1) return parts[0];
    return mk_pat(PTuple{std::move(parts)}, loc);
  }

  PatternPtr pattern_atom() {
    SourceLoc loc = peek().loc;
    if (accept(Tok::Underscore)) return mk_pat(PWild{}, loc);
    if (peek().kind == Tok::Ident) return mk_pat(PVar{next().text}, loc);
    if (accept(Tok::LParen)) {
      if (accept(Tok::RParen)) return mk_pat(PUnit{}, loc);
      PatternPtr p = pattern();
      expect(Tok::RParen, "')'");
      return p;
    }
    throw ParseError(loc, "expected a pattern");
  }

  ExprPtr expr() {
    SourceLoc loc = peek().loc;
    switch (peek().kind) {
      case Tok::KwLet: {
        next();
        PatternPtr p = pattern();
        expect(Tok::Eq, "'='");
        ExprPtr rhs = expr();
        expect(Tok::KwIn, "'in'");
        ExprPtr body = expr();
        return mk_expr(LetE{p, rhs, body}, loc);
      }
      case Tok::KwIf: {
        next();
        ExprPtr c = expr();
        expect(Tok::KwThen, "'then'");
        ExprPtr t = expr();
        expect(Tok::KwElse, "'else'");
        ExprPtr e = expr();
        return mk_expr(IfE{c, t, e}, loc);
      }
      case Tok::KwFun: {
        next();
        PatternPtr p = pattern_atom();
        expect(Tok::Arrow, "'->'");
        return mk_expr(LambdaE{p, expr()}, loc);
      }
      case Tok::KwSample: {
        next();
        expect(Tok::LParen, "'('");
        ExprPtr d = expr();
        expect(Tok::RParen, "')'");
        return mk_expr(SampleE{d}, loc);
      }
      case Tok::KwObserve: {
        next();
        expect(Tok::LParen, "'('");
        ExprPtr d = expr();
        expect(Tok::Comma, "','");
        ExprPtr v = expr();
        expect(Tok::RParen, "')'");
        return mk_expr(ObserveE{d, v}, loc);
      }
      case Tok::KwUnfold: {
        next();
        expect(Tok::LParen, "'('");
        ExprPtr inst = expr();
        expect(Tok::Comma, "','");
        ExprPtr arg = expr();
        expect(Tok::RParen, "')'");
        return mk_expr(UnfoldE{inst, arg}, loc);
      }
      case Tok::KwInit: {
        next();
        std::string m = expect(Tok::Ident, "stream name").text;
        return mk_expr(InitE{m}, loc);
      }
      case Tok::KwInfer: {
        next();
        std::string m = expect(Tok::Ident, "stream name").text;
        return mk_expr(InferE{m}, loc);
      }
      default:
        return app_expr();
    }
  }

  ExprPtr app_expr() {
    SourceLoc loc = peek().loc;
    if (peek().kind == Tok::Ident && peek(1).kind == Tok::LParen) {
      std::string name = next().text;
      next();  // '('
      std::vector<ExprPtr> args;
      if (!accept(Tok::RParen)) {
        args.push_back(expr());
        while (accept(Tok::Comma)) args.push_back(expr());
        expect(Tok::RParen, "')'");
      }
      if (is_builtin_op(name)) return mk_expr(OpAppE{name, std::move(args)}, loc);
      ExprPtr arg;
      if (args.empty()) {
        arg = mk_expr(ConstE{Value::unit()}, loc);
      } else {
        arg = args.back();
        for (size_t i = args.size() - 1; i-- > 0;)
          arg = mk_expr(PairE{args[i], arg}, loc);
      }
      return mk_expr(FunAppE{name, arg}, loc);
    }
    return primary();
  }

  ExprPtr primary() {
    SourceLoc loc = peek().loc;
    switch (peek().kind) {
      case Tok::Int:
        return mk_expr(ConstE{Value::of_int(next().ival)}, loc);
      case Tok::Real:
        return mk_expr(ConstE{Value::of_real(next().rval)}, loc);
      case Tok::KwTrue:
        next();
        return mk_expr(ConstE{Value::of_bool(true)}, loc);
      case Tok::KwFalse:
        next();
        return mk_expr(ConstE{Value::of_bool(false)}, loc);
      case Tok::Ident: {
        std::string name = next().text;
        if (is_builtin_op(name)) return mk_expr(OpAppE{name, {}}, loc);
        return mk_expr(VarE{name}, loc);
      }
      case Tok::LParen: {
        next();
        if (accept(Tok::RParen)) return mk_expr(ConstE{Value::unit()}, loc);
        std::vector<ExprPtr> parts;
        parts.push_back(expr());
        while (accept(Tok::Comma)) parts.push_back(expr());
        expect(Tok::RParen, "')'");
        ExprPtr e = parts.back();
        for (size_t i = parts.size() - 1; i-- > 0;)
          e = mk_expr(PairE{parts[i], e}, loc);
        return e;
      }
      default:
        throw ParseError(loc, "expected an expression, got '" + peek().text + "'");
    }
  }

  std::vector<Token> toks_;
  size_t pos_ = 0;
};

// Rewrites the tree so that every value position really holds a value form,
// binding intermediate computations to reserved %tN names.
class Normalizer {
 public:
  Program run(Program prog) {
    for (auto& d : prog.decls) {
      if (auto* v = std::get_if<ValDecl>(&d)) {
        v->rhs = norm(v->rhs);
      } else if (auto* f = std::get_if<FunDecl>(&d)) {
        f->body = norm(f->body);
      } else if (auto* s = std::get_if<StreamDecl>(&d)) {
        s->init = norm(s->init);
        s->body = norm(s->body);
      }
    }
    return prog;
  }

 private:
  using Binds = std::vector<std::pair<PatternPtr, ExprPtr>>;

  std::string fresh() { return "%t" + std::to_string(counter_++); }

  ExprPtr wrap(Binds binds, ExprPtr core) {
    for (size_t i = binds.size(); i-- > 0;)
      core = mk_expr(LetE{binds[i].first, binds[i].second, core}, core->loc);
    return core;
  }

  ExprPtr norm(const ExprPtr& e) {
    Binds binds;
    ExprPtr core = norm_node(e, binds);
    return wrap(std::move(binds), core);
  }

  // Normalizes one node; hoisted bindings go to `binds`, the returned node
  // has values in all value positions.
  ExprPtr norm_node(const ExprPtr& e, Binds& binds) {
    const SourceLoc loc = e->loc;
    if (std::holds_alternative<ConstE>(e->e) || std::holds_alternative<VarE>(e->e) ||
        std::holds_alternative<InitE>(e->e) || std::holds_alternative<InferE>(e->e))
      return e;
    if (const auto* p = std::get_if<PairE>(&e->e))
      return mk_expr(PairE{value(p->fst, binds), value(p->snd, binds)}, loc);
    if (const auto* op = std::get_if<OpAppE>(&e->e)) {
      std::vector<ExprPtr> args;
      for (const auto& a : op->args) args.push_back(value(a, binds));
      return mk_expr(OpAppE{op->op, std::move(args)}, loc);
    }
    if (const auto* f = std::get_if<FunAppE>(&e->e))
      return mk_expr(FunAppE{f->fn, value(f->arg, binds)}, loc);
    if (const auto* i = std::get_if<IfE>(&e->e)) {
      ExprPtr c = value(i->cond, binds);
      return mk_expr(IfE{c, norm(i->then_e), norm(i->else_e)}, loc);
    }
    if (const auto* l = std::get_if<LetE>(&e->e)) {
      // Keep the let structure; both sides normalize independently.
      return mk_expr(LetE{l->pat, norm(l->rhs), norm(l->body)}, loc);
    }
    if (const auto* u = std::get_if<UnfoldE>(&e->e)) {
      ExprPtr inst = value(u->inst, binds);
      return mk_expr(UnfoldE{inst, value(u->arg, binds)}, loc);
    }
    if (const auto* s = std::get_if<SampleE>(&e->e))
      return mk_expr(SampleE{value(s->dist, binds)}, loc);
    if (const auto* o = std::get_if<ObserveE>(&e->e)) {
      ExprPtr d = value(o->dist, binds);
      return mk_expr(ObserveE{d, value(o->data, binds)}, loc);
    }
    const auto& lam = std::get<LambdaE>(e->e);
    return mk_expr(LambdaE{lam.param, norm(lam.body)}, loc);
  }

  // Returns a value form for e, hoisting anything else.
  ExprPtr value(const ExprPtr& e, Binds& binds) {
    if (std::holds_alternative<ConstE>(e->e) || std::holds_alternative<VarE>(e->e))
      return e;
    if (const auto* p = std::get_if<PairE>(&e->e))
      return mk_expr(PairE{value(p->fst, binds), value(p->snd, binds)}, e->loc);
    if (std::holds_alternative<LambdaE>(e->e)) return norm_node(e, binds);
    ExprPtr full = norm(e);
    std::string name = fresh();
    binds.push_back({mk_pat(PVar{name}, e->loc), full});
    return mk_expr(VarE{name}, e->loc);
  }

  int counter_ = 0;
};

}  // namespace

bool is_builtin_op(const std::string& name) { return builtin_ops().count(name) > 0; }

bool is_value_expr(const Expr& e) {
  if (std::holds_alternative<ConstE>(e.e) || std::holds_alternative<VarE>(e.e) ||
      std::holds_alternative<LambdaE>(e.e))
    return true;
  if (const auto* p = std::get_if<PairE>(&e.e))
    return is_value_expr(*p->fst) && is_value_expr(*p->snd);
  return false;
}

Program parse_program(const std::string& source) {
  Lexer lex(source);
  Parser parser(lex.run());
  Program prog = parser.program();
  return Normalizer{}.run(std::move(prog));
}

Program parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_program(ss.str());
}

}  // namespace muf
