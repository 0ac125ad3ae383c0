#include "twr/csv.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

namespace twr {

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) {
    return std::string(field);
  }
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, std::vector<std::string> header)
    : columns_(header.size()) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path);
  if (!out_) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out_ << ',';
    out_ << csv_escape(header[i]);
  }
  out_ << '\n';
}

void CsvWriter::Row::field(std::string text) {
  if (count_++) line_ += ',';
  line_ += text;
}

CsvWriter::Row& CsvWriter::Row::operator<<(double v) {
  field(format_double(v));
  return *this;
}

CsvWriter::Row& CsvWriter::Row::operator<<(long v) {
  field(std::to_string(v));
  return *this;
}

CsvWriter::Row& CsvWriter::Row::operator<<(std::string_view s) {
  field(csv_escape(s));
  return *this;
}

CsvWriter::Row::~Row() {
  writer_.out_ << line_ << '\n';
}

}  // namespace twr
