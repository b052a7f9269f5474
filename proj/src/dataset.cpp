#include "aggnet/dataset.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include "aggnet/errors.hpp"

namespace aggnet {

int parse_label(const std::string& name) {
  for (int i = 0; i < kNumClasses; ++i) {
    if (name == kClassNames[static_cast<std::size_t>(i)]) return i;
  }
  throw DataError("unknown label '" + name + "'");
}

const char* label_name(int id) {
  if (id < 0 || id >= kNumClasses) throw DataError("label id out of range");
  return kClassNames[static_cast<std::size_t>(id)];
}

std::array<std::size_t, kNumClasses> Dataset::class_counts() const {
  std::array<std::size_t, kNumClasses> counts{};
  for (const auto& ex : examples) ++counts[static_cast<std::size_t>(ex.label)];
  return counts;
}

namespace {

// One CSV record (RFC 4180 flavor). Returns false at end of input.
// row_no counts records, starting at 1.
bool next_record(const std::string& body, std::size_t& pos, std::size_t row_no,
                 std::vector<std::string>& fields, const std::string& path) {
  fields.clear();
  if (pos >= body.size()) return false;

  std::string field;
  bool in_quotes = false;
  bool saw_any = false;
  while (pos < body.size()) {
    char c = body[pos];
    saw_any = true;
    if (in_quotes) {
      if (c == '"') {
        if (pos + 1 < body.size() && body[pos + 1] == '"') {
          field.push_back('"');
          pos += 2;
        } else {
          in_quotes = false;
          ++pos;
        }
      } else {
        field.push_back(c);
        ++pos;
      }
      continue;
    }
    if (c == '"' && field.empty()) {
      in_quotes = true;
      ++pos;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      ++pos;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && pos + 1 < body.size() && body[pos + 1] == '\n') ++pos;
      ++pos;
      fields.push_back(std::move(field));
      return true;
    } else {
      field.push_back(c);
      ++pos;
    }
  }
  if (in_quotes) {
    throw ParseError(path + " row " + std::to_string(row_no) + ": unterminated quoted field");
  }
  if (saw_any) {
    fields.push_back(std::move(field));
    return true;
  }
  return false;
}

}  // namespace

Dataset load_dataset(const std::string& path, std::vector<std::string>* warnings) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string body = buf.str();

  Dataset ds;
  std::unordered_set<std::string> seen_ids;
  std::vector<std::string> fields;
  std::size_t pos = 0;
  std::size_t row_no = 0;
  bool first = true;
  while (true) {
    ++row_no;
    if (!next_record(body, pos, row_no, fields, path)) break;
    if (fields.size() == 1 && fields[0].empty()) {
      --row_no;  // blank trailing line, not a record
      continue;
    }
    if (first) {
      first = false;
      if (fields.size() == 3 && fields[0] == "id" && fields[1] == "text" &&
          fields[2] == "label") {
        continue;  // header
      }
    }
    if (fields.size() != 3) {
      throw ParseError(path + " row " + std::to_string(row_no) + ": expected 3 columns, got " +
                       std::to_string(fields.size()));
    }

    LabeledExample ex;
    ex.id = fields[0];
    ex.text = fields[1];
    try {
      ex.label = parse_label(fields[2]);
    } catch (const DataError& e) {
      throw DataError(path + " row " + std::to_string(row_no) + ": " + e.what());
    }

    if (!seen_ids.insert(ex.id).second && warnings) {
      warnings->push_back("duplicate id '" + ex.id + "' at row " + std::to_string(row_no));
    }
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

Dataset merge_datasets(const Dataset& original, const Dataset& augmented) {
  Dataset out;
  out.examples.reserve(original.size() + augmented.size());
  out.examples.insert(out.examples.end(), original.examples.begin(), original.examples.end());
  out.examples.insert(out.examples.end(), augmented.examples.begin(), augmented.examples.end());
  return out;
}

}  // namespace aggnet
