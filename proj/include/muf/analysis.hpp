#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "muf/ast.hpp"
#include "muf/source.hpp"

namespace muf {

// Abstract random variable. Fresh ids are handed out per analysis run, in
// program order, so an id interval identifies everything a branch or an
// iteration introduced.
using AVar = std::size_t;

// What an expression touches when it is observed or evaluated: lb holds the
// variables that must be affected, ub those that may be.
struct RefSet {
  std::set<AVar> lb, ub;
};

// Consumption-side abstract graph. in over-approximates the variables
// introduced, con under-approximates the ones directly consumed by an
// observation or a forced evaluation. An assume does not consume its
// parents outright; it records them as pending on the new variable, and
// con_star closes con over those edges: once a variable is known consumed,
// the variables it was sampled from are consumed through it.
struct MCGraph {
  std::set<AVar> in, con;
  std::map<AVar, std::set<AVar>> pending;

  void assume(AVar x, const RefSet& r);
  void observe(AVar x, const RefSet& r);
  void value(const RefSet& r);
  std::set<AVar> con_star() const;
  static MCGraph join(MCGraph a, const MCGraph& b);
};

// Path-side abstract graph. p maps (start, end) to an upper bound on the
// length of a chain of assumes between the two, sep holds separators:
// variables that observation or evaluation has consumed.
struct UPGraph {
  std::map<std::pair<AVar, AVar>, std::size_t> p;
  std::set<AVar> sep;

  void assume(AVar x, const RefSet& r);
  void observe(AVar x, const RefSet& r);
  void value(const RefSet& r);
  static UPGraph join(UPGraph a, const UPGraph& b);
};

// Longest recorded path that starts at a variable the reference set may
// mention and ends at a variable that is not a separator (a separated end
// is no longer part of any unseparated path).
std::size_t path_bound(const RefSet& from, const UPGraph& g);

// The abstraction cannot follow the program (recursion, first-class streams
// in probabilistic state, ...). Treated as a rejection, not a crash.
struct AnalysisError : Error {
  explicit AnalysisError(const std::string& msg)
      : Error("analysis error: " + msg) {}
};

// Verdict for one inference site.
struct SiteReport {
  std::string stream;
  SourceLoc loc;  // the infer expression (falls back to the declaration)
  bool mc = false;
  bool up = false;
  bool bounded = false;
  // Iterations until the first-iteration state variables were all consumed,
  // -1 if that never happened; on failure, the leftovers by source name
  // (binder of the sample where known, v<id> otherwise).
  int mc_iterations = -1;
  std::vector<std::string> mc_unconsumed;
  // Iterations until the state-rooted path bound converged, -1 on failure,
  // and the bound itself (the last value seen when diverging).
  int up_iterations = -1;
  std::size_t up_longest_path = 0;
  std::string note;  // human-readable failure detail, empty when clean
};

struct AnalysisOptions {
  int up_budget = 10;  // convergence bases tried before giving up
  int mc_budget = 50;  // iteration cap for the consumption analysis
};

SiteReport analyze_stream(const Program& prog, const StreamDecl& s,
                          AnalysisOptions opt = {});

// One report per infer site, in source order.
std::vector<SiteReport> analyze_program(const Program& prog,
                                        AnalysisOptions opt = {});

}  // namespace muf
