#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace phong::csv {

// Shortest text that reads back to the same double ("%.17g").
std::string format(double x);

// Quotes a field when it contains a comma, quote or line break.
std::string escape(std::string_view field);

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  void row(const std::vector<std::string>& fields);

 private:
  std::ostream& out_;
};

using Table = std::vector<std::vector<std::string>>;

// RFC-4180 reader; the header row is returned as row 0.
Table read(std::istream& in);

}  // namespace phong::csv
