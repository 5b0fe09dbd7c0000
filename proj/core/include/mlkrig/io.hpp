#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mlkrig/types.hpp"

namespace mlkrig::io {

// Shortest decimal that round-trips the double.
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
  Index column(const std::string &name) const;
};

// RFC 4180 quoting, '\n' line endings.
void write_csv(const std::string &path, const CsvTable &table);
CsvTable read_csv(const std::string &path);

// Observation files: d coordinate columns x1..xd followed by z.
void write_observations(const std::string &path, const Points &points,
                        const Eigen::VectorXd &z);
void read_observations(const std::string &path, Points &points, Eigen::VectorXd &z);
// Target files: coordinate columns only (a trailing z column is ignored
// when `d` is given and the file is wider).
Points read_points(const std::string &path, int d = -1);
void write_points(const std::string &path, const Points &points);

void write_json(const std::string &path, const nlohmann::json &j);
nlohmann::json read_json(const std::string &path);

std::string sha256_hex(const std::string &bytes);
std::string sha256_file(const std::string &path);

// Records written artifacts with their content hashes.
class Manifest {
public:
  void add(const std::string &name, const std::string &path);
  const nlohmann::json &json() const { return files_; }
  void write(const std::string &path, const nlohmann::json &config) const;

private:
  nlohmann::json files_ = nlohmann::json::array();
};

std::string join_path(const std::string &dir, const std::string &name);
void ensure_dir(const std::string &dir);

} // namespace mlkrig::io
