#include "pamir/count_table.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace pamir {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::int64_t parse_count(const std::string& field, const std::string& path,
                         std::size_t line, std::size_t column) {
  std::int64_t value = 0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end)
    throw ParseError(path, line, column,
                     "expected a nonnegative integer count, got '" + field +
                         "'");
  if (value < 0)
    throw ParseError(path, line, column, "negative count '" + field + "'");
  return value;
}

double parse_real(const std::string& field, const std::string& path,
                  std::size_t line, std::size_t column) {
  try {
    std::size_t used = 0;
    const double v = std::stod(field, &used);
    if (used != field.size()) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    throw ParseError(path, line, column,
                     "expected a numeric response, got '" + field + "'");
  }
}

}  // namespace

CountTable read_count_table(const std::string& path,
                            const std::optional<std::string>& response_column) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open count table: " + path);

  std::string line;
  if (!std::getline(in, line))
    throw ParseError(path, 1, 1, "empty count table");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_tabs(line);
  if (header.size() < 2)
    throw ParseError(path, 1, 1,
                     "header must contain a sample-id column plus at least "
                     "one taxon column");

  std::optional<std::size_t> response_index;
  CountTable table;
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (response_column && header[c] == *response_column) {
      if (response_index)
        throw ParseError(path, 1, c + 1,
                         "duplicate response column '" + *response_column +
                             "'");
      response_index = c;
      continue;
    }
    if (header[c].empty())
      throw ParseError(path, 1, c + 1, "empty taxon name");
    table.taxa.push_back(header[c]);
  }
  if (response_column && !response_index)
    throw ParseError(path, 1, 1,
                     "response column '" + *response_column + "' not found");
  if (table.taxa.empty())
    throw ParseError(path, 1, 2, "no taxon columns");
  {
    auto sorted = table.taxa;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw ParseError(path, 1, 2, "duplicate taxon names");
  }
  if (response_column) {
    table.response.emplace();
    table.response_column = *response_column;
  }

  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_tabs(line);
    if (fields.size() != header.size())
      throw ParseError(path, lineno, 1,
                       "row has " + std::to_string(fields.size()) +
                           " fields, header has " +
                           std::to_string(header.size()));
    if (fields[0].empty())
      throw ParseError(path, lineno, 1, "empty sample identifier");
    table.sample_ids.push_back(fields[0]);

    IntVector counts(table.p());
    Eigen::Index j = 0;
    for (std::size_t c = 1; c < fields.size(); ++c) {
      if (response_index && c == *response_index) {
        table.response->push_back(parse_real(fields[c], path, lineno, c + 1));
        continue;
      }
      counts[j++] = parse_count(fields[c], path, lineno, c + 1);
    }
    try {
      table.counts.emplace_back(std::move(counts));
    } catch (const Error& e) {
      throw ParseError(path, lineno, 2, e.what());
    }
  }
  if (table.sample_ids.empty())
    throw ParseError(path, 2, 1, "count table has no sample rows");
  {
    auto sorted = table.sample_ids;
    std::sort(sorted.begin(), sorted.end());
    const auto dup = std::adjacent_find(sorted.begin(), sorted.end());
    if (dup != sorted.end())
      throw ParseError(path, 2, 1, "duplicate sample identifier '" + *dup +
                                       "'");
  }
  return table;
}

void write_count_table(const CountTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open output file: " + path);
  out << "sample_id";
  for (const auto& t : table.taxa) out << '\t' << t;
  if (table.response) out << '\t'
                          << (table.response_column.empty()
                                  ? std::string("response")
                                  : table.response_column);
  out << '\n';
  for (Eigen::Index i = 0; i < table.n(); ++i) {
    out << table.sample_ids[static_cast<std::size_t>(i)];
    const auto& x = table.counts[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < x.size(); ++j) out << '\t' << x[j];
    if (table.response) {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g",
                    (*table.response)[static_cast<std::size_t>(i)]);
      out << '\t' << buf;
    }
    out << '\n';
  }
}

CountTable with_reference_taxon(const CountTable& table,
                                const std::string& reference) {
  if (reference.empty() || table.taxa.back() == reference) return table;
  const auto it =
      std::find(table.taxa.begin(), table.taxa.end(), reference);
  if (it == table.taxa.end())
    throw Error("reference taxon '" + reference + "' not found in table");
  const Eigen::Index ref =
      static_cast<Eigen::Index>(it - table.taxa.begin());

  CountTable out = table;
  out.taxa.erase(out.taxa.begin() + ref);
  out.taxa.push_back(reference);
  for (std::size_t i = 0; i < out.counts.size(); ++i) {
    const auto& x = table.counts[i];
    IntVector rearranged(x.size());
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < x.size(); ++j)
      if (j != ref) rearranged[k++] = x[j];
    rearranged[k] = x[ref];
    out.counts[i] = CountVector(std::move(rearranged));
  }
  return out;
}

std::vector<Eigen::Index> taxon_alignment(
    const std::vector<std::string>& table_taxa,
    const std::vector<std::string>& target_taxa) {
  std::map<std::string, Eigen::Index> where;
  for (std::size_t j = 0; j < table_taxa.size(); ++j)
    where[table_taxa[j]] = static_cast<Eigen::Index>(j);

  std::vector<std::string> missing, extra;
  std::vector<Eigen::Index> perm;
  perm.reserve(target_taxa.size());
  for (const auto& t : target_taxa) {
    const auto it = where.find(t);
    if (it == where.end())
      missing.push_back(t);
    else
      perm.push_back(it->second);
  }
  for (const auto& t : table_taxa) {
    if (std::find(target_taxa.begin(), target_taxa.end(), t) ==
        target_taxa.end())
      extra.push_back(t);
  }
  if (!missing.empty() || !extra.empty()) {
    std::ostringstream os;
    os << "taxon mismatch between table and model;";
    if (!missing.empty()) {
      os << " missing:";
      for (const auto& t : missing) os << ' ' << t;
      os << ';';
    }
    if (!extra.empty()) {
      os << " extra:";
      for (const auto& t : extra) os << ' ' << t;
    }
    throw Error(os.str());
  }
  return perm;
}

}  // namespace pamir
