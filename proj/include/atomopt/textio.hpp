#pragma once

#include <string>
#include <vector>

namespace atomopt::textio {

/// Shortest text form that round-trips a double exactly ("%.17g").
std::string fmt_double(double v);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);
bool file_exists(const std::string& path);
void ensure_dir(const std::string& path);

/// Tab-separated table with a fixed header; deterministic bytes.
class TsvWriter {
 public:
  explicit TsvWriter(std::vector<std::string> header);
  void row(const std::vector<std::string>& cells);
  const std::string& str() const { return out_; }
  void save(const std::string& path) const;

 private:
  std::size_t columns_;
  std::string out_;
};

}  // namespace atomopt::textio
