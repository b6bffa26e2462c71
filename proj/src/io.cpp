#include "islt/io.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "islt/errors.hpp"

namespace islt {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

CsvWriter::CsvWriter(const std::string& path) : os_(path, std::ios::trunc) {
  if (!os_) throw ValidationError("cannot open for writing: " + path);
}

void CsvWriter::header(const std::vector<std::string>& names) {
  begin_row();
  for (const auto& n : names) field(n);
  end_row();
}

void CsvWriter::begin_row() { first_ = true; }

void CsvWriter::field(double v) { field(format_number(v)); }

void CsvWriter::field(long long v) { field(std::to_string(v)); }

void CsvWriter::field(unsigned long long v) { field(std::to_string(v)); }

void CsvWriter::field(const std::string& s) {
  if (!first_) os_ << ',';
  os_ << s;
  first_ = false;
}

void CsvWriter::end_row() { os_ << '\n'; }

void write_field_csv(const std::string& path, const GridField& f) {
  const Grid& g = *f.grid;
  CsvWriter csv(path);
  if (g.dim() == 3) csv.header({"x", "y", "z", "value"});
  else csv.header({"x", "y", "value"});
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    const Point p = g.node_point(i);
    csv.begin_row();
    for (int a = 0; a < g.dim(); ++a) csv.field(p[a]);
    csv.field(f.values[i]);
    csv.end_row();
  }
}

std::uint64_t fnv1a64(const std::string& bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_hash(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot read: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return hex64(fnv1a64(ss.str()));
}

}  // namespace islt
