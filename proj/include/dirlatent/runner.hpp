#pragma once

// Command verbs behind the CLI: each takes a finalized configuration, writes
// its artifacts under an output directory, and returns printable summary
// text. Errors surface as the library's exception types; the process shell
// maps them to exit codes.

#include <string>

#include "dirlatent/config.hpp"

namespace dirlatent::runner {

// Finalizes + validates cfg, writes "<out>/config.resolved.json", then
// dispatches. Unknown verbs are ConfigError.
std::string run_verb(const std::string& verb, RunConfig cfg, const std::string& out_dir);

std::string run_gen_data(const RunConfig& cfg, const std::string& out_dir);
std::string run_train(const RunConfig& cfg, const std::string& out_dir);
std::string run_infer(const RunConfig& cfg, const std::string& out_dir);
std::string run_eval(const RunConfig& cfg, const std::string& out_dir);
std::string run_ablate(const RunConfig& cfg, const std::string& out_dir);
std::string run_selftest(const RunConfig& cfg, const std::string& out_dir);

// Worker cap for clip-parallel evaluation: DIRLATENT_THREADS when set,
// otherwise the hardware concurrency (at least 1).
int thread_budget();

}  // namespace dirlatent::runner
