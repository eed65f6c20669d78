#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace shellflow {

// Named arrays of doubles plus named text entries in one binary file:
//   magic "SHFLWFC1", u64 entry count, then per entry
//   u8 kind (0 numbers, 1 text), u64 name length, name,
//   u64 element count, payload (raw little-endian doubles or bytes).
// Entries are written in name order, so equal content gives equal files.
class FieldContainer {
 public:
  void put(const std::string& name, std::vector<double> values);
  void put_scalar(const std::string& name, double value) { put(name, {value}); }
  void put_text(const std::string& name, std::string text);

  bool has(const std::string& name) const;
  // Io errors name the missing entry.
  const std::vector<double>& get(const std::string& name) const;
  double scalar(const std::string& name) const;
  const std::string& text(const std::string& name) const;

  // Writes to a sibling temporary and renames, so a crash never leaves a
  // truncated file under the final name.
  void save(const std::filesystem::path& path) const;
  static FieldContainer load(const std::filesystem::path& path);

 private:
  std::map<std::string, std::vector<double>> numbers_;
  std::map<std::string, std::string> texts_;
};

}  // namespace shellflow
