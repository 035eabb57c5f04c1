#include "muf/value.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "muf/source.hpp"

namespace muf {

namespace {

void collect_rvs_into(const Value& v, std::vector<NodeId>& out) {
  if (const auto* rv = v.get_if<RV>()) {
    if (std::find(out.begin(), out.end(), rv->id) == out.end()) out.push_back(rv->id);
  } else if (const auto* p = v.get_if<std::shared_ptr<const PairV>>()) {
    collect_rvs_into((*p)->fst, out);
    collect_rvs_into((*p)->snd, out);
  } else if (const auto* s = v.get_if<std::shared_ptr<const SymApp>>()) {
    for (const auto& a : (*s)->args) collect_rvs_into(a, out);
  } else if (const auto* l = v.get_if<std::shared_ptr<const ListV>>()) {
    for (const auto& a : (*l)->items) collect_rvs_into(a, out);
  } else if (const auto* arr = v.get_if<std::shared_ptr<const ArrayV>>()) {
    for (const auto& a : (*arr)->items) collect_rvs_into(a, out);
  } else if (const auto* d = v.get_if<DistVal>()) {
    // Permutation and point-mass distributions can close over values that
    // still mention random variables; the scalar families cannot.
    if (const auto* sh = std::get_if<ShuffleD>(&d->d)) {
      for (const auto& a : *sh->items) collect_rvs_into(a, out);
    } else if (const auto* dd = std::get_if<DeltaD>(&d->d)) {
      collect_rvs_into(*dd->v, out);
    } else if (const auto* c = std::get_if<CategoricalD>(&d->d)) {
      for (const auto& [a, w] : *c->support) collect_rvs_into(a, out);
    }
  }
}

}  // namespace

std::vector<NodeId> collect_rvs(const Value& v) {
  std::vector<NodeId> out;
  collect_rvs_into(v, out);
  return out;
}

bool value_eq(const Value& a, const Value& b) {
  if (a.rep.index() != b.rep.index()) {
    // int/real compare numerically across representations
    const long* ai = a.get_if<long>();
    const double* ad = a.get_if<double>();
    const long* bi = b.get_if<long>();
    const double* bd = b.get_if<double>();
    if ((ai || ad) && (bi || bd)) {
      double x = ai ? static_cast<double>(*ai) : *ad;
      double y = bi ? static_cast<double>(*bi) : *bd;
      return x == y;
    }
    return false;
  }
  if (a.is_unit()) return true;
  if (const auto* x = a.get_if<bool>()) return *x == *b.get_if<bool>();
  if (const auto* x = a.get_if<long>()) return *x == *b.get_if<long>();
  if (const auto* x = a.get_if<double>()) return *x == *b.get_if<double>();
  if (const auto* x = a.get_if<RV>()) return x->id == b.get_if<RV>()->id;
  if (const auto* x = a.get_if<std::shared_ptr<const PairV>>()) {
    const auto& y = *b.get_if<std::shared_ptr<const PairV>>();
    return value_eq((*x)->fst, y->fst) && value_eq((*x)->snd, y->snd);
  }
  auto eq_items = [](const std::vector<Value>& xs, const std::vector<Value>& ys) {
    if (xs.size() != ys.size()) return false;
    for (size_t i = 0; i < xs.size(); ++i)
      if (!value_eq(xs[i], ys[i])) return false;
    return true;
  };
  if (const auto* x = a.get_if<std::shared_ptr<const ListV>>())
    return eq_items((*x)->items, (*b.get_if<std::shared_ptr<const ListV>>())->items);
  if (const auto* x = a.get_if<std::shared_ptr<const ArrayV>>())
    return eq_items((*x)->items, (*b.get_if<std::shared_ptr<const ArrayV>>())->items);
  return false;
}

double as_real(const Value& v) {
  if (const auto* x = v.get_if<double>()) return *x;
  if (const auto* x = v.get_if<long>()) return static_cast<double>(*x);
  if (const auto* x = v.get_if<bool>()) return *x ? 1.0 : 0.0;
  throw EvalError("expected a number, got " + value_describe(v));
}

long as_int(const Value& v) {
  if (const auto* x = v.get_if<long>()) return *x;
  throw EvalError("expected an int, got " + value_describe(v));
}

bool as_bool(const Value& v) {
  if (const auto* x = v.get_if<bool>()) return *x;
  throw EvalError("expected a bool, got " + value_describe(v));
}

std::string value_describe(const Value& v) {
  std::ostringstream os;
  if (v.is_unit()) {
    os << "()";
  } else if (const auto* x = v.get_if<bool>()) {
    os << (*x ? "true" : "false");
  } else if (const auto* x = v.get_if<long>()) {
    os << *x;
  } else if (const auto* x = v.get_if<double>()) {
    os << *x;
  } else if (const auto* x = v.get_if<RV>()) {
    os << "#" << x->id;
  } else if (const auto* x = v.get_if<std::shared_ptr<const PairV>>()) {
    os << "(" << value_describe((*x)->fst) << ", " << value_describe((*x)->snd) << ")";
  } else if (const auto* x = v.get_if<std::shared_ptr<const SymApp>>()) {
    os << (*x)->op << "(";
    for (size_t i = 0; i < (*x)->args.size(); ++i) {
      if (i) os << ", ";
      os << value_describe((*x)->args[i]);
    }
    os << ")";
  } else if (const auto* x = v.get_if<DistVal>()) {
    os << dist_describe(x->d);
  } else if (const auto* x = v.get_if<std::shared_ptr<const ListV>>()) {
    os << "[";
    for (size_t i = 0; i < (*x)->items.size(); ++i) {
      if (i) os << "; ";
      os << value_describe((*x)->items[i]);
    }
    os << "]";
  } else if (const auto* x = v.get_if<std::shared_ptr<const ArrayV>>()) {
    os << "[|";
    for (size_t i = 0; i < (*x)->items.size(); ++i) {
      if (i) os << "; ";
      os << value_describe((*x)->items[i]);
    }
    os << "|]";
  } else if (v.get_if<Closure>()) {
    os << "<fun>";
  } else if (v.get_if<StreamVal>()) {
    os << "<stream>";
  } else if (v.get_if<std::shared_ptr<const DInstance>>()) {
    os << "<instance>";
  } else {
    os << "<infer-instance>";
  }
  return os.str();
}

}  // namespace muf
