#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace rankx {

std::string_view toolkit_version();

/// Lowercase hex SHA-256 of a byte string / of a file's contents.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Reproducibility record written next to every run's outputs. Only
/// `created_at` differs between otherwise identical runs.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::vector<std::filesystem::path> inputs;

  nlohmann::json to_json() const;
  void write(const std::filesystem::path& path) const;
};

/// "<output>.manifest.json"
std::filesystem::path manifest_path_for(const std::filesystem::path& output);

}  // namespace rankx
