#include "run_manifest.hpp"

#include <algorithm>
#include <array>
#include <ctime>
#include <fstream>
#include <memory>
#include <stdexcept>

#include <openssl/evp.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace playcall::cli {

namespace {

std::string iso_utc(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 init failed");
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest.data(), &len);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex += kHex[digest[i] >> 4];
    hex += kHex[digest[i] & 0xF];
  }
  return hex;
}

RunManifest::RunManifest(std::string command)
    : command_(std::move(command)), started_(std::chrono::system_clock::now()) {}

void RunManifest::add_input(const fs::path& path) {
  std::vector<fs::path> files;
  if (fs::is_directory(path)) {
    for (const auto& entry : fs::recursive_directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().filename() != "run_manifest.json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(path);
  }
  for (const auto& f : files) {
    inputs_.push_back({{"path", f.string()}, {"size", fs::file_size(f)}, {"sha256", sha256_file(f)}});
  }
}

void RunManifest::add_output(const fs::path& path) { outputs_.push_back(path); }

void RunManifest::write(const fs::path& path, int exit_code) const {
  json outputs = json::array();
  for (const auto& p : outputs_) {
    json entry{{"path", p.string()}};
    if (fs::is_regular_file(p)) entry["sha256"] = sha256_file(p);
    outputs.push_back(std::move(entry));
  }
  json doc{{"command", command_},
           {"version", PLAYCALL_VERSION},
           {"config", config_},
           {"seed", seed_ ? json(*seed_) : json(nullptr)},
           {"inputs", inputs_},
           {"outputs", outputs},
           {"notes", notes_},
           {"exit_code", exit_code},
           {"started", iso_utc(started_)},
           {"finished", iso_utc(std::chrono::system_clock::now())}};
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << doc.dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace playcall::cli
