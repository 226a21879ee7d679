#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

namespace testutil {

// Fresh scratch directory per call, under the build tree when ctest sets
// FIXEDLENS_TEST_TMP, else under the system temp directory.
inline std::filesystem::path scratch(const std::string& name) {
  const char* env = std::getenv("FIXEDLENS_TEST_TMP");
  const std::filesystem::path root = env ? std::filesystem::path(env) : std::filesystem::temp_directory_path() / "fixedlens_tests";
  const auto dir = root / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testutil
