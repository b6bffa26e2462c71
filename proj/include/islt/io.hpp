#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "islt/geometry.hpp"

namespace islt {

// Decimal with 12 significant digits; "inf"/"-inf"/"nan" for non-finite values.
std::string format_number(double v);

class CsvWriter {
public:
  explicit CsvWriter(const std::string& path);
  void header(const std::vector<std::string>& names);
  void begin_row();
  void field(double v);
  void field(long long v);
  void field(unsigned long long v);
  void field(int v) { field(static_cast<long long>(v)); }
  void field(const std::string& s);
  void field(bool b) { field(std::string(b ? "true" : "false")); }
  void end_row();

private:
  std::ofstream os_;
  bool first_ = true;
};

// x, y[, z], value for every node.
void write_field_csv(const std::string& path, const GridField& f);

std::uint64_t fnv1a64(const std::string& bytes, std::uint64_t h = 14695981039346656037ULL);
std::string hex64(std::uint64_t h);
std::string file_hash(const std::string& path);

}  // namespace islt
