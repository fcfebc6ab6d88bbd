#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

namespace testing {

inline std::filesystem::path data_dir() { return KGAGENT_DATA_DIR; }

/// Fresh per-process scratch directory.
inline std::filesystem::path scratch_dir() {
  static const std::filesystem::path dir = [] {
    auto d = std::filesystem::temp_directory_path() /
             ("kgagent_tests_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(d);
    return d;
  }();
  return dir;
}

inline std::filesystem::path write_file(const std::string& name, const std::string& content) {
  auto path = scratch_dir() / name;
  std::ofstream(path) << content;
  return path;
}

}  // namespace testing
