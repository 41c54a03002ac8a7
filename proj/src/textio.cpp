#include "atomopt/textio.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace atomopt::textio {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << content;
}

bool file_exists(const std::string& path) {
  return std::filesystem::exists(path);
}

void ensure_dir(const std::string& path) {
  std::filesystem::create_directories(path);
}

TsvWriter::TsvWriter(std::vector<std::string> header)
    : columns_(header.size()) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    out_ += header[i];
    out_ += (i + 1 < header.size()) ? '\t' : '\n';
  }
}

void TsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) {
    throw std::invalid_argument("TsvWriter: column count mismatch");
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    out_ += cells[i];
    out_ += (i + 1 < cells.size()) ? '\t' : '\n';
  }
}

void TsvWriter::save(const std::string& path) const { write_file(path, out_); }

}  // namespace atomopt::textio
