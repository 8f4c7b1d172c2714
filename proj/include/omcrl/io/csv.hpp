#pragma once

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

namespace omcrl::io {

// Comma-separated table whose first non-comment line is the header. Lines
// starting with '#' are schema comments, e.g. "# omcrl-train v1".
struct CsvTable {
  std::string schema;  // text of the first comment line, without '#'
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column(const std::string& name) const;
  // Numeric column; unparsable cells (e.g. "nan", "--") become NaN.
  std::vector<double> numbers(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);

// Append-only writer that flushes each row so a crashed run keeps its log.
class CsvWriter {
 public:
  CsvWriter() = default;
  CsvWriter(const std::string& path, const std::string& schema, const std::string& header);
  void row(const std::string& line);
  bool open() const { return file_ != nullptr; }
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;
  CsvWriter(CsvWriter&& other) noexcept;
  CsvWriter& operator=(CsvWriter&& other) noexcept;

 private:
  std::FILE* file_ = nullptr;
};

}  // namespace omcrl::io
