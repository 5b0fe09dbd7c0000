#include "mlkrig/io.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "mlkrig/error.hpp"

namespace mlkrig::io {

std::string format_double(double v) {
  if (std::isnan(v))
    return "nan";
  if (std::isinf(v))
    return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void CsvTable::add_row(std::vector<std::string> row) {
  if (!header.empty() && row.size() != header.size())
    throw ConfigError("csv: row width does not match the header");
  rows.push_back(std::move(row));
}

Index CsvTable::column(const std::string &name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name)
      return static_cast<Index>(i);
  return -1;
}

namespace {

std::string quote(const std::string &s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos)
    return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"')
      out += '"';
    out += c;
  }
  return out + "\"";
}

void write_line(std::ostream &os, const std::vector<std::string> &cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i)
      os << ',';
    os << quote(cells[i]);
  }
  os << '\n';
}

std::vector<std::vector<std::string>> parse_csv(const std::string &text) {
  std::vector<std::vector<std::string>> out;
  std::vector<std::string> row;
  std::string cell;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(cell));
      cell.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n')
        ++i;
      if (any || !cell.empty()) {
        row.push_back(std::move(cell));
        out.push_back(std::move(row));
      }
      row.clear();
      cell.clear();
      any = false;
    } else {
      cell += c;
      any = true;
    }
  }
  if (quoted)
    throw ConfigError("csv: unterminated quoted field");
  if (any || !cell.empty()) {
    row.push_back(std::move(cell));
    out.push_back(std::move(row));
  }
  return out;
}

std::string slurp(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double parse_number(const std::string &s, const std::string &path, std::size_t row) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size())
      throw std::invalid_argument(s);
    return v;
  } catch (const std::exception &) {
    throw ConfigError(path + ": row " + std::to_string(row) + ": '" + s +
                      "' is not a number");
  }
}

} // namespace

void write_csv(const std::string &path, const CsvTable &table) {
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw ConfigError("cannot write '" + path + "'");
  write_line(os, table.header);
  for (const auto &r : table.rows)
    write_line(os, r);
}

CsvTable read_csv(const std::string &path) {
  auto lines = parse_csv(slurp(path));
  CsvTable t;
  if (lines.empty())
    throw ConfigError(path + ": empty csv");
  t.header = std::move(lines.front());
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].size() != t.header.size())
      throw ConfigError(path + ": row " + std::to_string(i) +
                        " has a different width than the header");
    t.rows.push_back(std::move(lines[i]));
  }
  return t;
}

void write_observations(const std::string &path, const Points &points,
                        const Eigen::VectorXd &z) {
  if (z.size() != points.cols())
    throw ConfigError("write_observations: length mismatch");
  CsvTable t;
  for (Index i = 0; i < points.rows(); ++i)
    t.header.push_back("x" + std::to_string(i + 1));
  t.header.push_back("z");
  for (Index j = 0; j < points.cols(); ++j) {
    std::vector<std::string> r;
    for (Index i = 0; i < points.rows(); ++i)
      r.push_back(format_double(points(i, j)));
    r.push_back(format_double(z[j]));
    t.rows.push_back(std::move(r));
  }
  write_csv(path, t);
}

void read_observations(const std::string &path, Points &points, Eigen::VectorXd &z) {
  const auto t = read_csv(path);
  const Index zc = t.column("z");
  if (zc < 0)
    throw ConfigError(path + ": missing 'z' column");
  const Index d = static_cast<Index>(t.header.size()) - 1;
  if (d < 1)
    throw ConfigError(path + ": need at least one coordinate column");
  points.resize(d, static_cast<Index>(t.rows.size()));
  z.resize(static_cast<Index>(t.rows.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    Index k = 0;
    for (Index c = 0; c <= d; ++c) {
      const double v = parse_number(t.rows[r][static_cast<std::size_t>(c)], path, r + 1);
      if (c == zc)
        z[static_cast<Index>(r)] = v;
      else
        points(k++, static_cast<Index>(r)) = v;
    }
  }
}

Points read_points(const std::string &path, int d) {
  const auto t = read_csv(path);
  Index cols = static_cast<Index>(t.header.size());
  if (d > 0) {
    if (cols < d)
      throw ConfigError(path + ": expected " + std::to_string(d) + " coordinate columns");
    cols = d;
  } else if (t.column("z") == cols - 1) {
    --cols;
  }
  Points p(cols, static_cast<Index>(t.rows.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    for (Index c = 0; c < cols; ++c)
      p(c, static_cast<Index>(r)) =
          parse_number(t.rows[r][static_cast<std::size_t>(c)], path, r + 1);
  return p;
}

void write_points(const std::string &path, const Points &points) {
  CsvTable t;
  for (Index i = 0; i < points.rows(); ++i)
    t.header.push_back("x" + std::to_string(i + 1));
  for (Index j = 0; j < points.cols(); ++j) {
    std::vector<std::string> r;
    for (Index i = 0; i < points.rows(); ++i)
      r.push_back(format_double(points(i, j)));
    t.rows.push_back(std::move(r));
  }
  write_csv(path, t);
}

void write_json(const std::string &path, const nlohmann::json &j) {
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw ConfigError("cannot write '" + path + "'");
  os << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::string &path) {
  const std::string text = slurp(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error &e) {
    throw ConfigError(path + ": invalid JSON: " + e.what());
  }
}

std::string sha256_hex(const std::string &bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw NumericalError("sha256 failed");
  std::ostringstream ss;
  for (unsigned int i = 0; i < len; ++i)
    ss << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return ss.str();
}

std::string sha256_file(const std::string &path) { return sha256_hex(slurp(path)); }

void Manifest::add(const std::string &name, const std::string &path) {
  files_.push_back({{"name", name},
                    {"file", std::filesystem::path(path).filename().string()},
                    {"sha256", sha256_file(path)}});
}

void Manifest::write(const std::string &path, const nlohmann::json &config) const {
  write_json(path, {{"config", config}, {"files", files_}});
}

std::string join_path(const std::string &dir, const std::string &name) {
  return (std::filesystem::path(dir) / name).string();
}

void ensure_dir(const std::string &dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw ConfigError("cannot create directory '" + dir + "': " + ec.message());
}

} // namespace mlkrig::io
