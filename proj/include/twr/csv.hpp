#pragma once

// Locale-independent CSV output. Doubles print as the shortest string that
// round-trips, so equal values give byte-equal files.

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace twr {

std::string format_double(double value);
std::string csv_escape(std::string_view field);

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::vector<std::string> header);

  class Row {
   public:
    Row& operator<<(double v);
    Row& operator<<(long v);
    Row& operator<<(int v) { return *this << static_cast<long>(v); }
    Row& operator<<(std::size_t v) { return *this << static_cast<long>(v); }
    Row& operator<<(std::string_view s);
    Row& operator<<(const char* s) { return *this << std::string_view(s); }
    Row& operator<<(const std::string& s) { return *this << std::string_view(s); }
    ~Row();

   private:
    friend class CsvWriter;
    explicit Row(CsvWriter& w) : writer_(w) {}
    void field(std::string text);
    CsvWriter& writer_;
    std::string line_;
    std::size_t count_ = 0;
  };

  Row row() { return Row(*this); }
  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
  std::size_t columns_;
};

}  // namespace twr
