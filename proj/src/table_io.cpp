#include "equivmd/table_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>

#include "equivmd/errors.hpp"

namespace equivmd::io {

namespace {

std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> fields;
  if (delim == ' ') {  // any whitespace run
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) fields.push_back(tok);
    return fields;
  }
  std::string cur;
  for (char c : line) {
    if (c == delim) {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_double(const std::string& tok, std::size_t line_no) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(tok, &pos);
    while (pos < tok.size() && std::isspace(static_cast<unsigned char>(tok[pos]))) ++pos;
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line_no) + ": not a number: '" + tok + "'");
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

Matrix read_delimited_matrix(const std::filesystem::path& path, std::optional<char> delimiter,
                             bool header_row) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path.string());

  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) lines.push_back(line);
  }
  if (header_row && !lines.empty()) lines.erase(lines.begin());
  if (lines.empty()) throw EmptyInput("no data rows in " + path.string());

  char delim;
  if (delimiter) {
    delim = *delimiter;
  } else if (lines.front().find('\t') != std::string::npos) {
    delim = '\t';
  } else if (lines.front().find(',') != std::string::npos) {
    delim = ',';
  } else {
    delim = ' ';
  }

  std::vector<double> entries;
  std::size_t cols = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto fields = split_fields(lines[i], delim);
    if (i == 0) {
      cols = fields.size();
      if (cols == 0) throw ParseError("line 1: no fields");
    } else if (fields.size() != cols) {
      throw ParseError("line " + std::to_string(i + 1) + ": expected " + std::to_string(cols) +
                       " fields, found " + std::to_string(fields.size()));
    }
    for (const auto& f : fields) entries.push_back(parse_double(trim(f), i + 1));
  }
  return Matrix(lines.size(), cols, std::move(entries));
}

void write_results(std::ostream& out, std::span<const SimResult> results) {
  out << "scenario\tmethod\tn\treplications\trejections\trate\tmc_se\tfailures\n";
  char buf[64];
  for (const SimResult& r : results) {
    out << scenario_name(r.scenario) << '\t' << method_name(r.method) << '\t' << r.n << '\t'
        << r.replications << '\t' << r.rejections << '\t';
    std::snprintf(buf, sizeof buf, "%.10g", r.rate);
    out << buf << '\t';
    std::snprintf(buf, sizeof buf, "%.10g", r.mc_se);
    out << buf << '\t' << r.failures << '\n';
  }
}

std::vector<SimResult> read_results(std::istream& in) {
  std::vector<SimResult> results;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (!header_seen) {
      header_seen = true;
      if (t.rfind("scenario", 0) == 0) continue;  // header row
    }
    const auto fields = split_fields(t, '\t');
    if (fields.size() != 8)
      throw ParseError("line " + std::to_string(line_no) + ": expected 8 tab-separated fields");
    SimResult r;
    const auto scen = scenario_from_name(trim(fields[0]));
    if (!scen) throw ParseError("line " + std::to_string(line_no) + ": unknown scenario");
    r.scenario = *scen;
    const auto meth = method_from_name(trim(fields[1]));
    if (!meth) throw ParseError("line " + std::to_string(line_no) + ": unknown method");
    r.method = *meth;
    r.n = static_cast<std::size_t>(parse_double(trim(fields[2]), line_no));
    r.replications = static_cast<std::size_t>(parse_double(trim(fields[3]), line_no));
    r.rejections = static_cast<std::size_t>(parse_double(trim(fields[4]), line_no));
    r.rate = parse_double(trim(fields[5]), line_no);
    r.mc_se = parse_double(trim(fields[6]), line_no);
    r.failures = static_cast<std::size_t>(parse_double(trim(fields[7]), line_no));
    results.push_back(r);
  }
  return results;
}

std::vector<SimResult> read_results_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path.string());
  return read_results(in);
}

void write_summary_tsv(std::ostream& out, const MadSummary& summary) {
  out << "method";
  for (ScenarioId s : summary.scenarios) out << '\t' << scenario_name(s);
  out << "\taverage\n";
  char buf[64];
  for (const auto& row : summary.rows) {
    out << method_name(row.method);
    for (double mad : row.mad_pp) {
      std::snprintf(buf, sizeof buf, "%.10g", mad);
      out << '\t' << buf;
    }
    std::snprintf(buf, sizeof buf, "%.10g", row.average_pp);
    out << '\t' << buf << '\n';
  }
}

void write_summary_pretty(std::ostream& out, const MadSummary& summary) {
  // mean |rate - nominal| in percentage points, rows sorted by the average
  out << std::left << std::setw(28) << "method";
  for (ScenarioId s : summary.scenarios) out << std::right << std::setw(8) << scenario_name(s);
  out << std::right << std::setw(10) << "average" << '\n';
  out << std::setfill('-') << std::setw(28 + 8 * static_cast<int>(summary.scenarios.size()) + 10)
      << "" << std::setfill(' ') << '\n';
  for (const auto& row : summary.rows) {
    out << std::left << std::setw(28) << method_name(row.method);
    out << std::fixed << std::setprecision(2);
    for (double mad : row.mad_pp) out << std::right << std::setw(8) << mad;
    out << std::right << std::setw(10) << row.average_pp << '\n';
    out.unsetf(std::ios::fixed);
    out << std::setprecision(6);
  }
}

}  // namespace equivmd::io
