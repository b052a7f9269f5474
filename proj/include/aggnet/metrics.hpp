#pragma once

#include <array>
#include <string>
#include <vector>

#include "aggnet/dataset.hpp"

namespace aggnet {

// confusion[g][p]: gold class g predicted as p.
using ConfusionMatrix = std::array<std::array<std::size_t, kNumClasses>, kNumClasses>;

ConfusionMatrix confusion_matrix(const std::vector<int>& gold, const std::vector<int>& pred);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct EvalReport {
  ConfusionMatrix confusion{};
  std::array<ClassMetrics, kNumClasses> per_class{};
  double weighted_f1 = 0.0;
  double accuracy = 0.0;
  std::size_t total = 0;
};

// Per-class F1 weighted by gold support. A class with precision+recall == 0
// contributes F1 = 0; empty input raises DataError.
double weighted_f1(const std::vector<int>& gold, const std::vector<int>& pred);

EvalReport evaluate(const std::vector<int>& gold, const std::vector<int>& pred);

// Human-readable report (fixed layout, deterministic formatting).
std::string format_report(const EvalReport& report);

}  // namespace aggnet
