#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "scarlab/eigensolver.hpp"
#include "scarlab/potential.hpp"

namespace scarlab {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --- WF2D ------------------------------------------------------------------------
//
// Little-endian throughout:
//   "WF2D"  u32 version = 1  u32 nx  u32 ny
//   f64 x_min x_max y_min y_max  f64 omega0  f64 B  u32 n_states
//   per state: f64 energy, then nx*ny (re, im) f64 pairs, x fastest
// optionally followed by the trailer "CFGH" u64 config_hash.

struct Wf2dFile {
  Grid2D grid;
  ConfinementParams params;
  std::vector<double> energies;
  std::vector<WaveField> states;
  std::optional<std::uint64_t> config_hash;
};

void write_wf2d(const std::filesystem::path& path, const Spectrum& spectrum,
                std::optional<std::uint64_t> config_hash = std::nullopt);
std::vector<char> encode_wf2d(const Grid2D& grid, const ConfinementParams& params,
                              const std::vector<double>& energies, const std::vector<WaveField>& states,
                              std::optional<std::uint64_t> config_hash = std::nullopt);
Wf2dFile decode_wf2d(std::string_view bytes);
Wf2dFile read_wf2d(const std::filesystem::path& path);

/// Spectrum view of a file; convergence data is not stored, so every state is
/// marked converged and residuals are empty.
Spectrum to_spectrum(Wf2dFile file, const BumpSet& bumps);

// --- CSV -------------------------------------------------------------------------

/// '#'-prefixed "key = value" lines, one column-name line, then rows.
struct CsvTable {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  [[nodiscard]] std::optional<std::string> find_meta(std::string_view key) const;
  [[nodiscard]] std::size_t column(std::string_view name) const;
  [[nodiscard]] double number(std::size_t row, std::string_view name) const;
};

/// 17 significant digits; reads back to the same double.
std::string format_double(double v);

std::string format_csv(const CsvTable& table);
CsvTable parse_csv(std::string_view text);
void write_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

CsvTable bumps_table(const BumpSet& bumps);
BumpSet bumps_from_table(const CsvTable& table);

// --- config hash -----------------------------------------------------------------

std::uint64_t fnv1a64(std::string_view bytes);
std::string hash_hex(std::uint64_t hash);
std::uint64_t parse_hash_hex(std::string_view text);

/// Writes `bytes` to `path` through a temporary file in the same directory.
void write_file(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace scarlab
