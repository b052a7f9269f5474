#include "aggnet/metrics.hpp"

#include <cstdio>

#include "aggnet/errors.hpp"

namespace aggnet {

ConfusionMatrix confusion_matrix(const std::vector<int>& gold, const std::vector<int>& pred) {
  if (gold.size() != pred.size()) {
    throw DataError("confusion matrix: gold and predictions differ in length");
  }
  ConfusionMatrix m{};
  for (std::size_t i = 0; i < gold.size(); ++i) {
    int g = gold[i], p = pred[i];
    if (g < 0 || g >= kNumClasses || p < 0 || p >= kNumClasses) {
      throw DataError("confusion matrix: class id out of range at position " +
                      std::to_string(i));
    }
    ++m[static_cast<std::size_t>(g)][static_cast<std::size_t>(p)];
  }
  return m;
}

EvalReport evaluate(const std::vector<int>& gold, const std::vector<int>& pred) {
  if (gold.empty()) throw DataError("cannot evaluate an empty prediction set");

  EvalReport rep;
  rep.confusion = confusion_matrix(gold, pred);
  rep.total = gold.size();

  std::size_t correct = 0;
  double weighted = 0.0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::size_t tp = rep.confusion[c][c];
    std::size_t support = 0, predicted = 0;
    for (std::size_t j = 0; j < kNumClasses; ++j) {
      support += rep.confusion[c][j];
      predicted += rep.confusion[j][c];
    }
    correct += tp;

    ClassMetrics& cm = rep.per_class[c];
    cm.support = support;
    cm.precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    cm.recall = support ? static_cast<double>(tp) / static_cast<double>(support) : 0.0;
    double pr = cm.precision + cm.recall;
    cm.f1 = pr > 0.0 ? 2.0 * cm.precision * cm.recall / pr : 0.0;
    weighted += cm.f1 * static_cast<double>(support);
  }
  rep.weighted_f1 = weighted / static_cast<double>(rep.total);
  rep.accuracy = static_cast<double>(correct) / static_cast<double>(rep.total);
  return rep;
}

double weighted_f1(const std::vector<int>& gold, const std::vector<int>& pred) {
  return evaluate(gold, pred).weighted_f1;
}

std::string format_report(const EvalReport& rep) {
  char buf[160];
  std::string out;
  std::snprintf(buf, sizeof(buf), "weighted_f1=%.6f\n", rep.weighted_f1);
  out += buf;
  std::snprintf(buf, sizeof(buf), "accuracy=%.6f\n", rep.accuracy);
  out += buf;
  std::snprintf(buf, sizeof(buf), "examples=%zu\n", rep.total);
  out += buf;

  out += "confusion_matrix rows=gold cols=pred order=CAG,NAG,OAG\n";
  for (std::size_t g = 0; g < kNumClasses; ++g) {
    out += kClassNames[g];
    for (std::size_t p = 0; p < kNumClasses; ++p) {
      std::snprintf(buf, sizeof(buf), "\t%zu", rep.confusion[g][p]);
      out += buf;
    }
    out += '\n';
  }

  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const ClassMetrics& cm = rep.per_class[c];
    std::snprintf(buf, sizeof(buf), "%s precision=%.6f recall=%.6f f1=%.6f support=%zu\n",
                  kClassNames[c], cm.precision, cm.recall, cm.f1, cm.support);
    out += buf;
  }
  return out;
}

}  // namespace aggnet
