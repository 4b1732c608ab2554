#include "scarlab/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace scarlab {
namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  } else {
    return v;
  }
}

class Writer {
 public:
  explicit Writer(std::vector<char>& out) : out_(out) {}
  template <typename T>
  void put(T v) {
    v = to_little(v);
    const char* p = reinterpret_cast<const char*>(&v);
    out_.insert(out_.end(), p, p + sizeof(T));
  }
  void raw(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }

 private:
  std::vector<char>& out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}
  template <typename T>
  T get(const char* what) {
    if (in_.size() - pos_ < sizeof(T)) throw FormatError(std::string("WF2D: truncated at ") + what);
    T v;
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return to_little(v);
  }
  std::string_view raw(std::size_t n, const char* what) {
    if (in_.size() - pos_ < n) throw FormatError(std::string("WF2D: truncated at ") + what);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  [[nodiscard]] std::size_t left() const { return in_.size() - pos_; }

 private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_commas(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto c = line.find(',', start);
    out.push_back(trim(line.substr(start, c == std::string_view::npos ? std::string_view::npos : c - start)));
    if (c == std::string_view::npos) break;
    start = c + 1;
  }
  return out;
}

}  // namespace

std::vector<char> encode_wf2d(const Grid2D& grid, const ConfinementParams& params,
                              const std::vector<double>& energies, const std::vector<WaveField>& states,
                              std::optional<std::uint64_t> config_hash) {
  if (energies.size() != states.size()) throw std::invalid_argument("WF2D: energies/states length mismatch");
  std::vector<char> out;
  out.reserve(64 + states.size() * (8 + grid.size() * 16));
  Writer w(out);
  w.raw("WF2D");
  w.put<std::uint32_t>(1);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(grid.nx));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(grid.ny));
  w.put(grid.x_min);
  w.put(grid.x_max);
  w.put(grid.y_min);
  w.put(grid.y_max);
  w.put(params.omega0);
  w.put(params.B);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(states.size()));
  for (std::size_t s = 0; s < states.size(); ++s) {
    if (!(states[s].grid == grid)) throw std::invalid_argument("WF2D: state grid mismatch");
    w.put(energies[s]);
    for (const cplx& v : states[s].values) {
      w.put(v.real());
      w.put(v.imag());
    }
  }
  if (config_hash) {
    w.raw("CFGH");
    w.put<std::uint64_t>(*config_hash);
  }
  return out;
}

void write_wf2d(const std::filesystem::path& path, const Spectrum& spectrum,
                std::optional<std::uint64_t> config_hash) {
  const auto bytes = encode_wf2d(spectrum.grid, spectrum.params, spectrum.energies, spectrum.states, config_hash);
  write_file(path, std::string_view(bytes.data(), bytes.size()));
}

Wf2dFile decode_wf2d(std::string_view bytes) {
  Reader r(bytes);
  if (r.raw(4, "magic") != "WF2D") throw FormatError("WF2D: bad magic");
  const auto version = r.get<std::uint32_t>("version");
  if (version != 1) throw FormatError("WF2D: unsupported version " + std::to_string(version));
  const auto nx = r.get<std::uint32_t>("nx");
  const auto ny = r.get<std::uint32_t>("ny");
  const double x_min = r.get<double>("x_min");
  const double x_max = r.get<double>("x_max");
  const double y_min = r.get<double>("y_min");
  const double y_max = r.get<double>("y_max");
  Wf2dFile f;
  f.params.omega0 = r.get<double>("omega0");
  f.params.B = r.get<double>("B");
  const auto n_states = r.get<std::uint32_t>("n_states");
  Grid2D g;
  try {
    g = grid_from_bounds(static_cast<int>(nx), static_cast<int>(ny), x_min, x_max, y_min, y_max);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("WF2D: bad grid header: ") + e.what());
  }
  f.grid = g;
  const std::size_t per_state = 8 + g.size() * 16;
  if (g.nx <= 0 || g.ny <= 0 || r.left() / per_state < n_states) {
    throw FormatError("WF2D: file too short for " + std::to_string(n_states) + " states of " +
                      std::to_string(nx) + "x" + std::to_string(ny));
  }
  f.energies.reserve(n_states);
  f.states.reserve(n_states);
  for (std::uint32_t s = 0; s < n_states; ++s) {
    f.energies.push_back(r.get<double>("energy"));
    WaveField psi(g);
    for (auto& v : psi.values) {
      const double re = r.get<double>("re");
      const double im = r.get<double>("im");
      v = cplx(re, im);
    }
    f.states.push_back(std::move(psi));
  }
  if (r.left() > 0) {
    if (r.left() != 12 || r.raw(4, "trailer") != "CFGH") throw FormatError("WF2D: unexpected trailing bytes");
    f.config_hash = r.get<std::uint64_t>("config hash");
  }
  return f;
}

Wf2dFile read_wf2d(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  try {
    return decode_wf2d(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

Spectrum to_spectrum(Wf2dFile file, const BumpSet& bumps) {
  Spectrum s;
  s.grid = file.grid;
  s.params = file.params;
  s.bumps = bumps;
  s.energies = std::move(file.energies);
  s.states = std::move(file.states);
  s.converged.assign(s.states.size(), true);
  s.all_converged = true;
  return s;
}

// --- CSV -------------------------------------------------------------------------

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::optional<std::string> CsvTable::find_meta(std::string_view key) const {
  for (const auto& [k, v] : meta) {
    if (k == key) return v;
  }
  return std::nullopt;
}

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  throw FormatError("CSV: no column '" + std::string(name) + "'");
}

double CsvTable::number(std::size_t row, std::string_view name) const {
  const auto& cell = rows.at(row).at(column(name));
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw FormatError("CSV: column '" + std::string(name) + "' row " + std::to_string(row) +
                      ": not a number: '" + cell + "'");
  }
  return v;
}

std::string format_csv(const CsvTable& table) {
  std::string out;
  for (const auto& [k, v] : table.meta) out += "# " + k + " = " + v + "\n";
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    if (i) out += ',';
    out += table.columns[i];
  }
  out += '\n';
  for (const auto& row : table.rows) {
    if (row.size() != table.columns.size()) throw std::invalid_argument("CSV: row width != column count");
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += row[i];
    }
    out += '\n';
  }
  return out;
}

CsvTable parse_csv(std::string_view text) {
  CsvTable t;
  bool have_columns = false;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string line = trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        t.meta.emplace_back(trim(std::string_view(line).substr(1)), "");
      } else {
        t.meta.emplace_back(trim(std::string_view(line).substr(1, eq - 1)),
                            trim(std::string_view(line).substr(eq + 1)));
      }
      continue;
    }
    auto cells = split_commas(line);
    if (!have_columns) {
      t.columns = std::move(cells);
      have_columns = true;
    } else {
      if (cells.size() != t.columns.size()) {
        throw FormatError("CSV line " + std::to_string(line_no) + ": expected " +
                          std::to_string(t.columns.size()) + " fields, got " + std::to_string(cells.size()));
      }
      t.rows.push_back(std::move(cells));
    }
  }
  if (!have_columns) throw FormatError("CSV: no column header");
  return t;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) { write_file(path, format_csv(table)); }

CsvTable read_csv(const std::filesystem::path& path) {
  try {
    return parse_csv(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

CsvTable bumps_table(const BumpSet& bumps) {
  CsvTable t;
  t.meta = {{"amplitude", format_double(bumps.amplitude)},
            {"sigma", format_double(bumps.sigma)},
            {"region", format_double(bumps.region)},
            {"seed", bumps.seed ? std::to_string(*bumps.seed) : std::string("none")}};
  t.columns = {"x", "y"};
  for (const auto& p : bumps.positions) t.rows.push_back({format_double(p.x), format_double(p.y)});
  return t;
}

BumpSet bumps_from_table(const CsvTable& table) {
  auto need = [&](const char* key) {
    auto v = table.find_meta(key);
    if (!v) throw FormatError(std::string("bumps CSV: missing header '") + key + "'");
    return *v;
  };
  BumpSet b;
  b.amplitude = std::stod(need("amplitude"));
  b.sigma = std::stod(need("sigma"));
  b.region = std::stod(need("region"));
  const auto seed = need("seed");
  if (seed != "none") b.seed = std::stoull(seed);
  for (std::size_t r = 0; r < table.rows.size(); ++r) b.positions.push_back({table.number(r, "x"), table.number(r, "y")});
  return b;
}

// --- misc ------------------------------------------------------------------------

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

std::uint64_t parse_hash_hex(std::string_view text) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v, 16);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw FormatError("bad config hash '" + std::string(text) + "'");
  }
  return v;
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace scarlab
