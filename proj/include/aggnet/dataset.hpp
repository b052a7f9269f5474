#pragma once

#include <array>
#include <string>
#include <vector>

namespace aggnet {

// Class ids are fixed alphabetically: CAG=0, NAG=1, OAG=2. Every probability
// vector, confusion matrix and saved model uses this order.
inline constexpr int kNumClasses = 3;
inline constexpr std::array<const char*, 3> kClassNames = {"CAG", "NAG", "OAG"};

int parse_label(const std::string& name);  // throws DataError on unknown labels
const char* label_name(int id);

struct LabeledExample {
  std::string id;
  std::string text;
  int label = 0;
};

struct Dataset {
  std::vector<LabeledExample> examples;

  std::array<std::size_t, kNumClasses> class_counts() const;
  std::size_t size() const { return examples.size(); }
};

// Loads a 3-column CSV (id,text,label) with RFC-style quoting: quoted fields
// may contain commas, doubled quotes and newlines. A header row is skipped only
// when it is exactly id,text,label. Duplicate ids are allowed; they are
// reported through the optional warnings sink.
Dataset load_dataset(const std::string& path, std::vector<std::string>* warnings = nullptr);

// Originals first, then the augmented examples, order preserved.
Dataset merge_datasets(const Dataset& original, const Dataset& augmented);

}  // namespace aggnet
