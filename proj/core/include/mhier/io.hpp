#pragma once

// Output plumbing shared by the CLI and tests: atomic file writes
// (temp + rename in the target directory), canonical float formatting for
// CSV (17 significant digits, enough to round-trip a double), and the
// config hash embedded in every output header line.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mhier/integrate.hpp"

namespace mhier {

// version of every file format this library writes
inline constexpr int kSchemaVersion = 1;

// shortest-width %.17g rendering
std::string format_g17(double v);

// FNV-1a 64-bit over the canonical config text
std::uint64_t fnv1a64(const std::string& text);

std::string hash_hex(std::uint64_t h);

// Write content to path via a temporary file in the same directory followed
// by an atomic rename. Creates parent directories as needed.
void atomic_write(const std::filesystem::path& path, const std::string& content);

// "# config=<hash> schema=<version>\n" — the provenance line each CSV starts
// with (JSON outputs carry the same pair as top-level fields instead)
std::string csv_provenance(const std::string& config_hash);

// Trajectory table "t,q,p,H_eff,G_2_0,G_1_1,G_0_2,..." with moment columns
// in storage order; point runs carry no moment columns. A non-empty source
// tag appends a trailing `source` column holding that tag on every row.
// header_comment, when given, is emitted verbatim before the column header.
std::string trajectory_csv(const Trajectory& traj, const std::string& header_comment = "",
                           const std::string& source = "");

// Generic wide table: one abscissa column plus named value columns.
// Columns must all match the abscissa length.
std::string wide_csv(const std::string& abscissa_name, const std::vector<double>& abscissa,
                     const std::vector<std::string>& column_names,
                     const std::vector<std::vector<double>>& columns,
                     const std::string& header_comment = "");

}  // namespace mhier
