#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "muf/driver.hpp"

int main(int argc, char** argv) {
  CLI::App app{"mufc: analyze and run bounded-memory probabilistic streams"};
  app.require_subcommand(1);

  muf::RunConfig cfg;
  std::string file;
  std::string corpus = "corpus";
  long steps = 0;
  uint64_t seed = 0;
  std::string input;

  auto add_file = [&](CLI::App* c) {
    c->add_option("file", file, "program source (.muf)")->required();
  };
  auto add_exec = [&](CLI::App* c, int default_particles) {
    c->add_option("--particles", cfg.particles, "particles per inference site")
        ->default_val(default_particles)
        ->check(CLI::PositiveNumber);
    c->add_option("--steps", steps, "stream transitions to run")
        ->check(CLI::NonNegativeNumber);
    c->add_option("--seed", seed, "root random seed (MUFC_SEED as fallback)");
    c->add_option("--input", input,
                  "per-step inputs: JSONL file, JSON array file, or inline "
                  "JSON array");
    c->add_option("--format", cfg.format, "output format: json or csv");
  };

  CLI::App* check = app.add_subcommand(
      "check", "static bounded-memory analysis of every inference site");
  add_file(check);
  check->add_option("--up-budget", cfg.up_budget,
                    "iteration budget for the path analysis")
      ->check(CLI::PositiveNumber);
  check->add_option("--format", cfg.format, "output format (json)");

  CLI::App* run =
      app.add_subcommand("run", "run inference and print per-step outputs");
  add_file(run);
  add_exec(run, 100);

  CLI::App* trace = app.add_subcommand(
      "trace", "run one instrumented particle and print per-step statistics");
  add_file(trace);
  add_exec(trace, 1);
  trace->add_option("--particle-index", cfg.particle_index,
                    "which particle to instrument")
      ->check(CLI::NonNegativeNumber);

  CLI::App* bench = app.add_subcommand(
      "bench", "analyze the bundled benchmarks against expected verdicts");
  bench->add_option("--corpus", corpus, "benchmark source directory")
      ->capture_default_str();
  bench->add_option("--up-budget", cfg.up_budget,
                    "iteration budget for the path analysis")
      ->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  CLI::App* cmd = app.get_subcommands().front();
  auto given = [&](const std::string& name) {
    const CLI::Option* o = cmd->get_option_no_throw(name);
    return o != nullptr && o->count() > 0;
  };
  if (given("--steps")) cfg.steps = steps;
  if (given("--seed")) cfg.seed = seed;
  if (given("--input")) cfg.input = input;

  if (cmd == check) return muf::cmd_check(file, cfg, std::cout, std::cerr);
  if (cmd == run) return muf::cmd_run(file, cfg, std::cout, std::cerr);
  if (cmd == trace) return muf::cmd_trace(file, cfg, std::cout, std::cerr);
  return muf::cmd_bench(corpus, cfg, std::cout, std::cerr);
}
