#pragma once

// Shared fixture loading for the test binaries.

#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>

#include "debias/resources.hpp"

namespace debias::testing {

inline std::filesystem::path test_data(const std::string& name) {
  return std::filesystem::path(DEBIAS_TEST_DATA_DIR) / name;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// The bundled data directory, loaded once per process.
inline std::shared_ptr<const Resources> bundled() {
  static const auto resources = Resources::load(ResourcePaths::defaults());
  return resources;
}

/// Fixed seed unless DEBIAS_TEST_SEED is set.
inline std::uint64_t seed() {
  if (const char* s = std::getenv("DEBIAS_TEST_SEED")) return std::stoull(s);
  return 20240502;
}

}  // namespace debias::testing
