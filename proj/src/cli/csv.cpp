#include "fusemean/cli/csv.hpp"

#include "fusemean/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace fusemean::cli {

namespace {

std::string_view
trim(std::string_view s)
{
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view>
split(std::string_view line)
{
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

std::string
where(std::size_t line, std::size_t column)
{
  return " at line " + std::to_string(line) + ", column " + std::to_string(column);
}

} // namespace

FusedDataset
parse_csv(std::string_view text, bool header)
{
  FusedDataset data;
  std::size_t d = 0;
  std::size_t line_no = 0;
  bool skipped_header = !header;
  std::size_t pos = 0;
  std::vector<double> row;
  std::vector<double> observed;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos)
      end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (trim(line).empty())
      continue;
    if (!skipped_header) {
      skipped_header = true;
      continue;
    }
    auto fields = split(line);
    if (d == 0) {
      d = fields.size();
      if (d < 2)
        throw ValidationError("CSV needs at least two columns");
      data.complete = Matrix(0, d);
    }
    if (fields.size() != d)
      throw ValidationError("ragged row" + where(line_no, fields.size()) + ": expected " +
                            std::to_string(d) + " fields, found " + std::to_string(fields.size()));
    row.assign(d, 0.0);
    Pattern s;
    for (std::size_t j = 0; j < d; ++j) {
      std::string_view f = fields[j];
      if (f == "NA")
        continue;
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (f.empty() || ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v))
        throw ValidationError("unrecognized token '" + std::string(f) + "'" + where(line_no, j + 1));
      row[j] = v;
      s.push_back(static_cast<int>(j));
    }
    if (s.empty())
      throw ValidationError("fully missing row at line " + std::to_string(line_no));
    if (s.size() == d) {
      data.complete.append_row(row);
      continue;
    }
    observed.clear();
    for (int j : s)
      observed.push_back(row[static_cast<std::size_t>(j)]);
    auto it = data.incomplete.find(s);
    if (it == data.incomplete.end())
      it = data.incomplete.emplace(s, Matrix(0, s.size())).first;
    it->second.append_row(observed);
  }
  if (d == 0)
    throw ValidationError("CSV contains no data rows");
  return data;
}

FusedDataset
ingest_csv(const std::string& path, bool header)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ValidationError("cannot read data file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str(), header);
}

int
csv_dimension(const FusedDataset& data)
{
  return static_cast<int>(data.complete.cols());
}

void
check_patterns(const FusedDataset& data, const PatternSet& patterns)
{
  std::string extra;
  for (const auto& [s, block] : data.incomplete)
    if (!patterns.index_of(s)) {
      if (!extra.empty())
        extra += ", ";
      extra += format_pattern(s);
    }
  if (!extra.empty())
    throw ValidationError("patterns present in the data but not in the config: " + extra);
}

} // namespace fusemean::cli
