#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "microclust/partition.hpp"

namespace microclust {

// Raised for malformed partition or parameter text; carries the 1-based
// line number where parsing stopped (0 when not line-specific).
class ParseError : public std::runtime_error {
public:
  ParseError(const std::string &what, std::size_t line)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

// Two text formats are understood:
//   membership  `element_id,cluster_label` per line (element order = row order)
//   sizes       one positive cluster size per line
// Blank lines and lines starting with '#' are skipped, as is a leading
// `element_id,cluster_label` header. The format is picked from the column
// count of the first data row.
Partition read_partition(std::istream &in);
Partition read_partition(const std::filesystem::path &path);

// Membership format, elements numbered from 1, canonical cluster labels.
void write_membership(std::ostream &out, const Partition &p);
void write_membership(const std::filesystem::path &path, const Partition &p);

void write_sizes(std::ostream &out, const Partition &p);

} // namespace microclust
