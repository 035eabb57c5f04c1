#include "muf/driver.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "muf/analysis.hpp"
#include "muf/dyncheck.hpp"
#include "muf/interp.hpp"
#include "muf/parser.hpp"
#include "muf/types.hpp"

namespace muf {

namespace {

using json = nlohmann::ordered_json;

uint64_t resolve_seed(const RunConfig& cfg) {
  if (cfg.seed) return *cfg.seed;
  if (const char* env = std::getenv("MUFC_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw Error(std::string("MUFC_SEED is not a number: ") + env);
    }
  }
  return 0;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Values to JSON (run output) and JSON to values (step inputs).

json mdistr_json(const MDistr& d);

json value_json(const Value& v) {
  if (v.is_unit()) return nullptr;
  if (const bool* b = v.get_if<bool>()) return *b;
  if (const long* n = v.get_if<long>()) return *n;
  if (const double* x = v.get_if<double>()) return *x;
  if (const auto* p = v.get_if<std::shared_ptr<const PairV>>())
    return json::array({value_json((*p)->fst), value_json((*p)->snd)});
  if (const auto* l = v.get_if<std::shared_ptr<const ListV>>()) {
    json a = json::array();
    for (const Value& it : (*l)->items) a.push_back(value_json(it));
    return a;
  }
  if (const auto* l = v.get_if<std::shared_ptr<const ArrayV>>()) {
    json a = json::array();
    for (const Value& it : (*l)->items) a.push_back(value_json(it));
    return a;
  }
  if (const DistVal* d = v.get_if<DistVal>()) return mdistr_json(d->d);
  // Symbolic or internal values never cross a stream output in a well-typed
  // program; describe them rather than crash if one does.
  return value_describe(v);
}

json mdistr_json(const MDistr& d) {
  json j;
  if (const auto* g = std::get_if<Gaussian>(&d)) {
    j["dist"] = "gaussian";
    j["mean"] = g->mean;
    j["var"] = g->var;
  } else if (const auto* b = std::get_if<BetaD>(&d)) {
    j["dist"] = "beta";
    j["alpha"] = b->a;
    j["beta"] = b->b;
    j["mean"] = b->a / (b->a + b->b);
  } else if (const auto* be = std::get_if<BernoulliD>(&d)) {
    j["dist"] = "bernoulli";
    j["p"] = be->p;
  } else if (const auto* po = std::get_if<PoissonD>(&d)) {
    j["dist"] = "poisson";
    j["rate"] = po->rate;
  } else if (const auto* u = std::get_if<UniformD>(&d)) {
    j["dist"] = "uniform";
    j["lo"] = u->lo;
    j["hi"] = u->hi;
  } else if (const auto* dl = std::get_if<DeltaD>(&d)) {
    j["dist"] = "delta";
    j["value"] = value_json(*dl->v);
  } else if (const auto* c = std::get_if<CategoricalD>(&d)) {
    j["dist"] = "categorical";
    json sup = json::array();
    for (const auto& [v, w] : *c->support)
      sup.push_back(json{{"value", value_json(v)}, {"prob", w}});
    j["support"] = sup;
  } else if (const auto* s = std::get_if<ShuffleD>(&d)) {
    j["dist"] = "shuffle";
    json items = json::array();
    for (const Value& v : *s->items) items.push_back(value_json(v));
    j["items"] = items;
  } else if (const auto* m = std::get_if<MixtureD>(&d)) {
    j["dist"] = "mixture";
    json comps = json::array();
    for (const auto& [cd, w] : m->comps->items)
      comps.push_back(json{{"weight", w}, {"component", mdistr_json(cd)}});
    j["components"] = comps;
  }
  return j;
}

// Numeric leaves in structure order, for the csv output of `run`.
void flatten_numeric(const json& j, std::vector<double>& out) {
  if (j.is_number()) {
    out.push_back(j.get<double>());
  } else if (j.is_boolean()) {
    out.push_back(j.get<bool>() ? 1.0 : 0.0);
  } else if (j.is_array()) {
    for (const json& e : j) flatten_numeric(e, out);
  } else if (j.is_object()) {
    for (const auto& [k, e] : j.items())
      if (k != "dist") flatten_numeric(e, out);
  }
}

Value json_to_value(const json& j, const TypePtr& t) {
  const Type* ty = deref(t);
  switch (ty->k) {
    case TK::Unit:
      if (j.is_null()) return Value::unit();
      break;
    case TK::Bool:
      if (j.is_boolean()) return Value::of_bool(j.get<bool>());
      break;
    case TK::Int:
      if (j.is_number_integer()) return Value::of_int(j.get<long>());
      break;
    case TK::Real:
      if (j.is_number()) return Value::of_real(j.get<double>());
      break;
    case TK::Prod:
      if (j.is_array() && j.size() == 2)
        return Value::pair(json_to_value(j[0], ty->a),
                           json_to_value(j[1], ty->b));
      break;
    case TK::List:
    case TK::Array: {
      if (!j.is_array()) break;
      std::vector<Value> items;
      items.reserve(j.size());
      for (const json& e : j) items.push_back(json_to_value(e, ty->a));
      return ty->k == TK::List ? Value::list(std::move(items))
                               : Value::array(std::move(items));
    }
    default:
      throw Error("input: the stream input type cannot be built from JSON");
  }
  throw Error("input: " + j.dump() + " does not fit the expected input shape");
}

// Default input when no file is given: zeros, alternating booleans, empty
// containers. Enough to drive every bundled model.
Value synth_input(const TypePtr& t, long step) {
  const Type* ty = deref(t);
  switch (ty->k) {
    case TK::Unit:
      return Value::unit();
    case TK::Bool:
      return Value::of_bool(step % 2 == 0);
    case TK::Int:
      return Value::of_int(0);
    case TK::Real:
      return Value::of_real(0.0);
    case TK::Prod:
      return Value::pair(synth_input(ty->a, step), synth_input(ty->b, step));
    case TK::List:
      return Value::list({});
    case TK::Array:
      return Value::array({});
    default:
      throw Error("cannot synthesize an input of this type; pass --input");
  }
}

// --input accepts an inline JSON array or a path to a file holding either a
// JSON array or one JSON value per line.
std::vector<json> parse_inputs(const std::string& arg) {
  auto first_nonspace = [](const std::string& s) -> char {
    for (char c : s)
      if (!std::isspace(static_cast<unsigned char>(c))) return c;
    return '\0';
  };
  std::string text = first_nonspace(arg) == '[' ? arg : read_file(arg);
  std::vector<json> items;
  if (first_nonspace(text) == '[') {
    json top = json::parse(text);
    if (!top.is_array()) throw Error("input: expected a JSON array");
    for (json& e : top) items.push_back(std::move(e));
    return items;
  }
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (first_nonspace(line) == '\0') continue;
    try {
      items.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw Error("input line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return items;
}

// First bank of particles inside an instance value: the inference instance
// the trace command instruments.
const PInstanceData* find_pinstance(const Value& v) {
  if (const auto* pi = v.get_if<std::shared_ptr<const PInstanceData>>())
    return pi->get();
  if (const auto* di = v.get_if<std::shared_ptr<const DInstance>>())
    return find_pinstance((*di)->state);
  if (const auto* p = v.get_if<std::shared_ptr<const PairV>>()) {
    if (const PInstanceData* r = find_pinstance((*p)->fst)) return r;
    return find_pinstance((*p)->snd);
  }
  if (const auto* l = v.get_if<std::shared_ptr<const ListV>>()) {
    for (const Value& it : (*l)->items)
      if (const PInstanceData* r = find_pinstance(it)) return r;
  }
  if (const auto* a = v.get_if<std::shared_ptr<const ArrayV>>()) {
    for (const Value& it : (*a)->items)
      if (const PInstanceData* r = find_pinstance(it)) return r;
  }
  return nullptr;
}

// Parsed and typed program. Held behind stable pointers because the checker
// keeps a reference to the program it validated.
struct Loaded {
  std::unique_ptr<Program> prog;
  std::unique_ptr<TypeChecker> tc;
};

std::optional<Loaded> load_checked(const std::string& file, std::ostream& err) {
  try {
    Loaded l;
    l.prog = std::make_unique<Program>(parse_program(read_file(file)));
    l.tc = std::make_unique<TypeChecker>(*l.prog);
    l.tc->check();
    return std::optional<Loaded>(std::move(l));
  } catch (const Error& e) {
    err << file << ": " << e.what() << "\n";
    return std::nullopt;
  }
}

json site_json(const SiteReport& s) {
  json j;
  j["site"] = json{{"name", s.stream}, {"location", s.loc.str()}};
  j["mc"] = s.mc;
  j["mc_iterations"] = s.mc_iterations;
  j["mc_unconsumed"] = s.mc_unconsumed;
  j["up"] = s.up;
  j["up_longest_path"] = s.up_longest_path;
  j["iterations_used"] = s.up_iterations;
  j["bounded"] = s.bounded;
  if (!s.note.empty()) j["note"] = s.note;
  return j;
}

// Shared driving loop of run and trace: resolve inputs, step the entry
// stream, hand each (step, output, successor) to the sink. `ready` runs
// after the program loaded but before the first step.
template <class Ready, class Sink>
int drive(const std::string& file, const RunConfig& cfg, std::ostream& err,
          Ready&& ready, Sink&& sink) {
  auto loaded = load_checked(file, err);
  if (!loaded) return 2;
  try {
    const StreamInfo& main_info = loaded->tc->main_stream();
    std::vector<json> given;
    if (cfg.input) given = parse_inputs(*cfg.input);
    long steps =
        cfg.steps.value_or(cfg.input ? static_cast<long>(given.size()) : 10);
    if (steps < 0) throw Error("steps must not be negative");
    if (cfg.input && steps > static_cast<long>(given.size()))
      throw Error("input has " + std::to_string(given.size()) +
                  " entries but " + std::to_string(steps) +
                  " steps were requested");
    ready();
    InterpOptions iopt;
    iopt.particles = cfg.particles;
    iopt.seed = resolve_seed(cfg);
    Interp interp(*loaded->prog, iopt);
    Value inst = interp.make_instance(loaded->prog->entry);
    for (long k = 0; k < steps; ++k) {
      Value input =
          cfg.input
              ? json_to_value(given[static_cast<std::size_t>(k)], main_info.in)
              : synth_input(main_info.in, k);
      auto stepped = interp.step_instance(inst, input);
      sink(k, stepped.first, stepped.second);
      inst = std::move(stepped.second);
    }
    return 0;
  } catch (const DegenerateError& e) {
    err << file << ": " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    err << file << ": " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

// ---------------------------------------------------------------------------

int cmd_check(const std::string& file, const RunConfig& cfg, std::ostream& out,
              std::ostream& err) {
  auto loaded = load_checked(file, err);
  if (!loaded) return 2;
  AnalysisOptions opt;
  opt.up_budget = cfg.up_budget;
  std::vector<SiteReport> sites = analyze_program(*loaded->prog, opt);
  bool all_bounded = true;
  json doc;
  doc["file"] = file;
  json arr = json::array();
  for (const SiteReport& s : sites) {
    all_bounded = all_bounded && s.bounded;
    arr.push_back(site_json(s));
  }
  doc["sites"] = std::move(arr);
  doc["bounded"] = all_bounded;
  out << doc.dump(2) << "\n";
  return all_bounded ? 0 : 1;
}

int cmd_run(const std::string& file, const RunConfig& cfg, std::ostream& out,
            std::ostream& err) {
  bool csv = cfg.format == "csv";
  if (!cfg.format.empty() && cfg.format != "json" && !csv) {
    err << "unknown format: " << cfg.format << "\n";
    return 2;
  }
  return drive(
      file, cfg, err, [] {},
      [&](long k, const Value& output, const Value&) {
        json oj = value_json(output);
        if (csv) {
          std::vector<double> cells;
          flatten_numeric(oj, cells);
          out << k;
          for (double x : cells) out << "," << x;
          out << "\n";
        } else {
          json line;
          line["step"] = k;
          line["output"] = std::move(oj);
          out << line.dump() << "\n";
        }
      });
}

int cmd_trace(const std::string& file, const RunConfig& cfg, std::ostream& out,
              std::ostream& err) {
  bool as_json = cfg.format == "json";
  if (!cfg.format.empty() && cfg.format != "csv" && !as_json) {
    err << "unknown format: " << cfg.format << "\n";
    return 2;
  }
  std::vector<StepStats> series;
  Value last_inst;  // keeps the final particle bank alive past the loop
  int rc = drive(
      file, cfg, err,
      [&] {
        if (!as_json) out << stats_csv_header() << "\n";
      },
      [&](long k, const Value&, const Value& next) {
        const PInstanceData* pi = find_pinstance(next);
        if (!pi)
          throw Error(
              "nothing to trace: the program has no inference instance");
        const auto& bank = pi->particles;
        if (cfg.particle_index < 0 ||
            static_cast<std::size_t>(cfg.particle_index) >= bank.size())
          throw Error("particle index " + std::to_string(cfg.particle_index) +
                      " out of range (bank of " + std::to_string(bank.size()) +
                      ")");
        last_inst = next;
        const Particle& pc =
            bank[static_cast<std::size_t>(cfg.particle_index)];
        StepStats st = step_stats(pc);
        series.push_back(st);
        if (as_json) {
          json row;
          row["step"] = k;
          row["reachable"] = st.reachable;
          row["max_init_chain"] = st.max_init_chain;
          row["max_marg_chain"] = st.max_marg_chain;
          row["max_state_path"] = st.max_state_path;
          row["max_unconsumed_m"] = st.max_unconsumed_m;
          out << row.dump() << "\n";
        } else {
          out << stats_csv_row(static_cast<std::size_t>(k), st) << "\n";
        }
      });
  if (rc != 0) return rc;
  if (series.empty()) return 0;  // header only on zero steps
  HighLevelReport hl = check_high_level(series);
  LowLevelReport ll = check_low_level(series);
  const Particle& pc = find_pinstance(last_inst)
                           ->particles[static_cast<std::size_t>(
                               cfg.particle_index)];
  ChainProbe probe = chain_bounds_probe(pc.graph, pc.trace);
  const char* verdict = hl.bounded() ? "bounded" : "growing";
  if (as_json) {
    json sum;
    sum["summary"] = json{{"m_bound", hl.m_bound},
                          {"m_growing", hl.m_growing},
                          {"c_bound", hl.c_bound},
                          {"c_growing", hl.c_growing},
                          {"max_reachable", ll.max_reachable},
                          {"max_ratio", ll.max_ratio},
                          {"zero_root_ok", ll.zero_root_ok},
                          {"chain_probe_ok", probe.ok()},
                          {"verdict", verdict}};
    out << sum.dump() << "\n";
  } else {
    out << "# m_bound=" << hl.m_bound
        << " m_growing=" << (hl.m_growing ? "yes" : "no") << "\n";
    out << "# c_bound=" << hl.c_bound
        << " c_growing=" << (hl.c_growing ? "yes" : "no") << "\n";
    out << "# max_reachable=" << ll.max_reachable << " max_ratio=" << std::fixed
        << std::setprecision(2) << ll.max_ratio << std::defaultfloat
        << " zero_root_ok=" << (ll.zero_root_ok ? "yes" : "no") << "\n";
    out << "# chain_probe=" << (probe.ok() ? "ok" : "violated") << "\n";
    out << "# verdict=" << verdict << "\n";
  }
  return 0;
}

namespace {

struct BenchEntry {
  const char* name;
  const char* file;
  bool mc, up;                // what the analysis is expected to report
  bool actual_mc, actual_up;  // ground truth from manual reasoning
};

// The bundled models with their expected verdicts. The one divergence is
// slam, whose map is provably consumed cell by cell but rejected by the
// conservative consumption rule.
constexpr BenchEntry kBench[] = {
    {"kalman", "kalman.muf", true, true, true, true},
    {"kalman-hold-first", "kalman_hold_first.muf", true, false, true, false},
    {"gaussian-random-walk", "gaussian_random_walk.muf", false, true, false,
     true},
    {"robot", "robot.muf", true, true, true, true},
    {"coin", "coin.muf", true, true, true, true},
    {"gaussian-gaussian", "gaussian_gaussian.muf", true, true, true, true},
    {"outlier", "outlier.muf", false, true, false, true},
    {"mtt", "mtt.muf", false, true, false, true},
    {"slam", "slam.muf", false, true, true, true},
};

std::string mark(bool b) { return b ? "✓" : "✗"; }

std::size_t display_width(const std::string& s) {
  std::size_t w = 0;
  for (unsigned char c : s)
    if ((c & 0xC0) != 0x80) ++w;
  return w;
}

std::string pad(std::string s, std::size_t w) {
  std::size_t have = display_width(s);
  if (have < w) s.append(w - have, ' ');
  return s;
}

}  // namespace

int cmd_bench(const std::string& corpus_dir, const RunConfig& cfg,
              std::ostream& out, std::ostream& err) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(corpus_dir)) {
    err << "corpus directory not found: " << corpus_dir << "\n";
    return 2;
  }
  AnalysisOptions opt;
  opt.up_budget = cfg.up_budget;
  std::vector<std::string> mismatches;
  out << pad("benchmark", 24) << pad("m-consumed", 12)
      << pad("unsep. paths", 14) << pad("bounded", 9) << pad("expected", 10)
      << pad("actual", 8) << "result\n";
  for (const BenchEntry& b : kBench) {
    fs::path path = fs::path(corpus_dir) / b.file;
    if (!fs::exists(path)) {
      err << "missing benchmark source: " << path.string() << "\n";
      return 2;
    }
    bool got_mc = false, got_up = false;
    try {
      Program prog = parse_program(read_file(path.string()));
      TypeChecker tc(prog);
      tc.check();
      std::vector<SiteReport> sites = analyze_program(prog, opt);
      if (sites.empty()) throw Error("no inference site");
      got_mc = sites.front().mc;
      got_up = sites.front().up;
    } catch (const Error& e) {
      err << path.string() << ": " << e.what() << "\n";
      return 2;
    }
    bool ok = got_mc == b.mc && got_up == b.up;
    if (!ok) mismatches.push_back(b.name);
    out << pad(b.name, 24) << pad(mark(got_mc), 12) << pad(mark(got_up), 14)
        << pad(mark(got_mc && got_up), 9)
        << pad(mark(b.mc) + " " + mark(b.up) + " " + mark(b.mc && b.up), 10)
        << pad(mark(b.actual_mc && b.actual_up), 8)
        << (ok ? "ok" : "MISMATCH") << "\n";
  }
  if (mismatches.empty()) {
    out << "all benchmarks match the expected verdicts\n";
    return 0;
  }
  out << "mismatched: ";
  for (std::size_t i = 0; i < mismatches.size(); ++i)
    out << (i ? ", " : "") << mismatches[i];
  out << "\n";
  return 1;
}

}  // namespace muf
