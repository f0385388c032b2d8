#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "equivmd/linalg.hpp"
#include "equivmd/simharness.hpp"

namespace equivmd::io {

/// Reads a delimited-text matrix (rows = observations, columns = variables).
/// The delimiter is auto-detected (tab, then comma, then whitespace) unless
/// given; `header_row` skips the first non-empty line. Throws ParseError on
/// malformed content, EmptyInput when no data rows remain.
Matrix read_delimited_matrix(const std::filesystem::path& path, std::optional<char> delimiter,
                             bool header_row);

/// Simulation results as tab-separated text, one row per (scenario, method, n).
void write_results(std::ostream& out, std::span<const SimResult> results);
std::vector<SimResult> read_results(std::istream& in);
std::vector<SimResult> read_results_file(const std::filesystem::path& path);

void write_summary_tsv(std::ostream& out, const MadSummary& summary);
void write_summary_pretty(std::ostream& out, const MadSummary& summary);

}  // namespace equivmd::io
