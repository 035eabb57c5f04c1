#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace muf {

// Options shared by the command entry points. Unset optionals fall back to
// per-command defaults (and MUFC_SEED for the seed).
struct RunConfig {
  int particles = 100;
  std::optional<long> steps;
  std::optional<uint64_t> seed;
  std::optional<std::string> input;  // file path, or inline JSON array
  int up_budget = 10;
  std::string format;  // "json" or "csv"; empty picks the command default
  int particle_index = 0;
};

// Exit codes: 0 success, 1 rejection or benchmark mismatch, 2 usage, parse,
// type or runtime error, 3 degenerate particle filter. Reports go to `out`,
// diagnostics to `err`.
int cmd_check(const std::string& file, const RunConfig& cfg, std::ostream& out,
              std::ostream& err);
int cmd_run(const std::string& file, const RunConfig& cfg, std::ostream& out,
            std::ostream& err);
int cmd_trace(const std::string& file, const RunConfig& cfg, std::ostream& out,
              std::ostream& err);
int cmd_bench(const std::string& corpus_dir, const RunConfig& cfg,
              std::ostream& out, std::ostream& err);

}  // namespace muf
