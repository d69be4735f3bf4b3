#include "flowcheck/dataset.hpp"

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "flowcheck/errors.hpp"

namespace flowcheck {

namespace {

void write_double(std::FILE* f, double v) {
  // assumes little-endian IEEE-754 host, which holds for every target we build on
  std::fwrite(&v, sizeof(v), 1, f);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void save_dataset_csv(const CalibrationDataset& data, const std::filesystem::path& path) {
  data.validate();
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open dataset file for writing: " + path.string());
  out << "# task: " << data.task << "\n";
  out << "# seed: " << data.seed << "\n";
  out << "# provenance: " << data.provenance << "\n";
  for (int c = 0; c < data.m(); ++c) out << "theta_" << (c + 1) << ",";
  for (int c = 0; c < data.d(); ++c) out << "x_" << (c + 1) << (c + 1 < data.d() ? "," : "\n");
  for (int r = 0; r < data.n(); ++r) {
    for (int c = 0; c < data.m(); ++c) out << format_double(data.theta(r, c)) << ",";
    for (int c = 0; c < data.d(); ++c)
      out << format_double(data.x(r, c)) << (c + 1 < data.d() ? "," : "\n");
  }
  if (!out) throw ConfigError("failed writing dataset file: " + path.string());
}

CalibrationDataset load_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset file: " + path.string());
  CalibrationDataset data;
  data.provenance = "file:" + path.filename().string();

  std::string line;
  int m = -1, d = -1;
  std::vector<double> theta_vals, x_vals;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto colon = line.find(':');
      if (colon == std::string::npos) continue;
      std::string key = line.substr(1, colon - 1);
      std::string val = line.substr(colon + 1);
      auto trim = [](std::string& s) {
        s.erase(0, s.find_first_not_of(" \t"));
        s.erase(s.find_last_not_of(" \t\r") + 1);
      };
      trim(key);
      trim(val);
      if (key == "task") data.task = val;
      else if (key == "seed") data.seed = std::strtoull(val.c_str(), nullptr, 10);
      else if (key == "provenance") data.provenance = val;
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      m = d = 0;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) {
        if (cell.rfind("theta_", 0) == 0) ++m;
        else if (cell.rfind("x_", 0) == 0) ++d;
        else throw ConfigError("dataset header has unknown column '" + cell + "' in " + path.string());
      }
      if (m < 1 || d < 1) throw ConfigError("dataset header must list theta_* then x_* columns");
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    int col = 0;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) throw ConfigError("dataset file has a non-numeric cell: " + cell);
      (col < m ? theta_vals : x_vals).push_back(v);
      ++col;
    }
    if (col != m + d) throw ConfigError("dataset row has wrong column count in " + path.string());
  }
  if (!header_seen) throw ConfigError("dataset file has no header row: " + path.string());
  const int n = static_cast<int>(theta_vals.size()) / m;
  data.theta = Matrix(n, m);
  data.x = Matrix(n, d);
  std::copy(theta_vals.begin(), theta_vals.end(), data.theta.data().begin());
  std::copy(x_vals.begin(), x_vals.end(), data.x.data().begin());
  data.calibration_ok = true;  // the CLI re-checks identity against the flow's training tag
  data.validate();
  return data;
}

void save_dataset_binary(const CalibrationDataset& data, const std::filesystem::path& path) {
  data.validate();
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  if (!f) throw ConfigError("cannot open dataset file for writing: " + path.string());
  std::fwrite("FCK1", 1, 4, f);
  std::uint32_t dims[3] = {static_cast<std::uint32_t>(data.n()),
                           static_cast<std::uint32_t>(data.m()),
                           static_cast<std::uint32_t>(data.d())};
  std::fwrite(dims, sizeof(std::uint32_t), 3, f);
  for (int r = 0; r < data.n(); ++r) {
    for (int c = 0; c < data.m(); ++c) write_double(f, data.theta(r, c));
    for (int c = 0; c < data.d(); ++c) write_double(f, data.x(r, c));
  }
  std::fclose(f);
}

CalibrationDataset load_dataset_binary(const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.string().c_str(), "rb");
  if (!f) throw ConfigError("cannot open dataset file: " + path.string());
  char magic[4];
  if (std::fread(magic, 1, 4, f) != 4 || std::memcmp(magic, "FCK1", 4) != 0) {
    std::fclose(f);
    throw ConfigError("dataset file lacks FCK1 magic: " + path.string());
  }
  std::uint32_t dims[3];
  if (std::fread(dims, sizeof(std::uint32_t), 3, f) != 3) {
    std::fclose(f);
    throw ConfigError("dataset file truncated: " + path.string());
  }
  CalibrationDataset data;
  const int n = dims[0], m = dims[1], d = dims[2];
  data.theta = Matrix(n, m);
  data.x = Matrix(n, d);
  for (int r = 0; r < n; ++r) {
    if (std::fread(data.theta.row(r).data(), sizeof(double), m, f) != static_cast<std::size_t>(m) ||
        std::fread(data.x.row(r).data(), sizeof(double), d, f) != static_cast<std::size_t>(d)) {
      std::fclose(f);
      throw ConfigError("dataset file truncated: " + path.string());
    }
  }
  std::fclose(f);
  data.provenance = "file:" + path.filename().string();
  data.calibration_ok = true;
  data.validate();
  return data;
}

}  // namespace flowcheck
