#pragma once

#include <functional>
#include <string>
#include <vector>

// The acceptance gate: a fixed list of end-to-end checks, each printing one
// PASS/FAIL/SKIP line. A criterion throwing counts as FAIL; SKIP is reserved
// for checks whose inputs (corpus files, opt-in env flags) are absent.
namespace acceptance {

enum class Status { kPass, kFail, kSkip };

struct Outcome {
  Status status = Status::kPass;
  std::string detail;
};

struct Criterion {
  std::string name;
  std::function<Outcome()> fn;
};

const std::vector<Criterion>& criteria();

// Runs every criterion in order; returns the process exit code (0 = no FAIL).
int run_all();

}  // namespace acceptance
