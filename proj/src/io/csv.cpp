#include "omcrl/io/csv.hpp"

#include "omcrl/error.hpp"

#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

namespace omcrl::io {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::optional<std::size_t> CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  return std::nullopt;
}

std::vector<double> CsvTable::numbers(const std::string& name) const {
  const auto col = column(name);
  if (!col) throw ConfigError("csv has no column '" + name + "'");
  std::vector<double> out;
  for (const auto& r : rows) {
    double v = std::numeric_limits<double>::quiet_NaN();
    if (*col < r.size() && !r[*col].empty()) {
      char* end = nullptr;
      const double x = std::strtod(r[*col].c_str(), &end);
      if (end && *end == '\0') v = x;
    }
    out.push_back(v);
  }
  return out;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read " + path);
  CsvTable t;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (t.schema.empty()) {
        const auto b = line.find_first_not_of("# ");
        t.schema = b == std::string::npos ? "" : line.substr(b);
      }
      continue;
    }
    if (t.header.empty()) {
      t.header = split(line);
    } else {
      t.rows.push_back(split(line));
    }
  }
  if (t.header.empty()) throw ConfigError(path + ": no header row");
  return t;
}

CsvWriter::CsvWriter(const std::string& path, const std::string& schema, const std::string& header) {
  file_ = std::fopen(path.c_str(), "w");
  if (!file_) throw ConfigError("cannot write " + path);
  std::fprintf(file_, "# %s\n%s\n", schema.c_str(), header.c_str());
  std::fflush(file_);
}

void CsvWriter::row(const std::string& line) {
  if (!file_) throw ContractError("CsvWriter: not open");
  std::fprintf(file_, "%s\n", line.c_str());
  std::fflush(file_);
}

CsvWriter::~CsvWriter() {
  if (file_) std::fclose(file_);
}

CsvWriter::CsvWriter(CsvWriter&& other) noexcept : file_(other.file_) { other.file_ = nullptr; }

CsvWriter& CsvWriter::operator=(CsvWriter&& other) noexcept {
  if (this != &other) {
    if (file_) std::fclose(file_);
    file_ = other.file_;
    other.file_ = nullptr;
  }
  return *this;
}

}  // namespace omcrl::io
