#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace mmfuse::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;    // configuration or input error
inline constexpr int kExitRuntime = 3;  // experiment failure

struct GlobalOptions {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::size_t jobs = 1;
  bool verbose = false;
};

// Each command reads its JSON config (when given), writes into options.out
// and reports on `out`; diagnostics go to `err`. They throw on failure.
void cmd_gen_data(const GlobalOptions& options, std::ostream& out, std::ostream& err);
void cmd_qc(const GlobalOptions& options, std::ostream& out, std::ostream& err);
void cmd_train(const GlobalOptions& options, std::ostream& out, std::ostream& err);
void cmd_eval(const GlobalOptions& options, std::ostream& out, std::ostream& err);
void cmd_explain(const GlobalOptions& options, std::ostream& out, std::ostream& err);
void cmd_reduce(const GlobalOptions& options, std::ostream& out, std::ostream& err);
void cmd_report(const GlobalOptions& options, std::ostream& out, std::ostream& err);

/// Parses argv, runs the subcommand and maps exceptions to exit codes.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mmfuse::cli
