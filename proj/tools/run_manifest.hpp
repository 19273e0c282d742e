#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace playcall::cli {

// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

// Record of one artifact-producing command: effective configuration, input
// fingerprints, outputs and timing. Written last, next to the outputs.
class RunManifest {
 public:
  explicit RunManifest(std::string command);

  nlohmann::json& config() { return config_; }
  nlohmann::json& notes() { return notes_; }
  // A file, or every regular file below a directory (sorted by path).
  void add_input(const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path);
  void set_seed(std::uint64_t seed) { seed_ = seed; }

  void write(const std::filesystem::path& path, int exit_code) const;

 private:
  std::string command_;
  nlohmann::json config_ = nlohmann::json::object();
  nlohmann::json notes_ = nlohmann::json::object();
  nlohmann::json inputs_ = nlohmann::json::array();
  std::vector<std::filesystem::path> outputs_;
  std::optional<std::uint64_t> seed_;
  std::chrono::system_clock::time_point started_;
};

}  // namespace playcall::cli
