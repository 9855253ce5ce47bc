#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace debias::zip {

struct Entry {
  std::string name;
  std::string data;
  bool is_directory = false;
};

/// Reads every entry through the central directory. Supports stored and
/// deflated entries. Throws ZipError on malformed archives, CRC mismatches,
/// encryption, or when the uncompressed total exceeds `max_total_bytes`.
std::vector<Entry> read_archive(std::string_view archive, std::uint64_t max_total_bytes = UINT64_MAX);

/// Builds an archive with deflated entries.
class Writer {
 public:
  void add(const std::string& name, std::string_view data);
  std::string finish();

 private:
  struct Record {
    std::string name;
    std::uint32_t crc = 0;
    std::uint32_t compressed = 0;
    std::uint32_t size = 0;
    std::uint32_t offset = 0;
  };
  std::string out_;
  std::vector<Record> records_;
};

}  // namespace debias::zip
