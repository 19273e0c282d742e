#include "playcall/log.hpp"

#include <cstdlib>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>

namespace playcall {

void configure_logging_from_env(spdlog::level::level_enum fallback) {
  auto level = fallback;
  if (const char* env = std::getenv("PLAYCALL_LOG")) {
    const std::string value(env);
    if (value == "error") level = spdlog::level::err;
    else if (value == "warn") level = spdlog::level::warn;
    else if (value == "info") level = spdlog::level::info;
    else if (value == "debug") level = spdlog::level::debug;
  }
  if (!spdlog::get("playcall")) spdlog::set_default_logger(spdlog::stderr_color_mt("playcall"));
  spdlog::set_level(level);
  spdlog::set_pattern("[%l] %v");
}

}  // namespace playcall
