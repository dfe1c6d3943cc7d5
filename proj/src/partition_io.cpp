#include "microclust/partition_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace microclust {

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos)
    return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::size_t parse_size(std::string_view field, std::size_t line) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size())
    throw ParseError("expected a non-negative integer, got '" + std::string(field) + "'", line);
  return v;
}

} // namespace

Partition read_partition(std::istream &in) {
  enum class Format { unknown, membership, sizes } format = Format::unknown;
  std::vector<std::string> cluster_ids;
  std::vector<std::size_t> sizes;
  std::unordered_set<std::string> element_ids;

  std::string raw;
  std::size_t line_no = 0;
  bool header_allowed = true;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#')
      continue;
    if (header_allowed && line == "element_id,cluster_label") {
      header_allowed = false;
      format = Format::membership;
      continue;
    }
    header_allowed = false;

    const auto comma = line.find(',');
    const Format row_format = comma == std::string_view::npos ? Format::sizes : Format::membership;
    if (format == Format::unknown)
      format = row_format;
    else if (format != row_format)
      throw ParseError("column count differs from the first data row", line_no);

    if (format == Format::sizes) {
      const std::size_t s = parse_size(line, line_no);
      if (s == 0)
        throw ParseError("cluster sizes must be positive", line_no);
      sizes.push_back(s);
      continue;
    }

    const std::string_view id = trim(line.substr(0, comma));
    const std::string_view label = trim(line.substr(comma + 1));
    if (id.empty() || label.empty() || label.find(',') != std::string_view::npos)
      throw ParseError("expected `element_id,cluster_label`", line_no);
    if (!element_ids.emplace(id).second)
      throw ParseError("duplicate element_id '" + std::string(id) + "'", line_no);
    cluster_ids.emplace_back(label);
  }

  if (format == Format::sizes)
    return partition_from_sizes(sizes);
  return partition_from_labels(cluster_ids);
}

Partition read_partition(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open partition file '" + path.string() + "'");
  try {
    return read_partition(in);
  } catch (const ParseError &e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
}

void write_membership(std::ostream &out, const Partition &p) {
  out << "# element_id,cluster_label\n";
  for (std::size_t i = 0; i < p.size(); ++i)
    out << (i + 1) << ',' << p.label(i) << '\n';
}

void write_membership(const std::filesystem::path &path, const Partition &p) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot write partition file '" + path.string() + "'");
  write_membership(out, p);
}

void write_sizes(std::ostream &out, const Partition &p) {
  out << "# cluster_size\n";
  for (std::size_t s : p.sizes())
    out << s << '\n';
}

} // namespace microclust
