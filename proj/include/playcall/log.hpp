#pragma once

#include <spdlog/spdlog.h>

namespace playcall {

// Sets the global spdlog level from PLAYCALL_LOG (error|warn|info|debug).
// Unset or unrecognized values leave the level at `fallback`.
void configure_logging_from_env(spdlog::level::level_enum fallback = spdlog::level::warn);

}  // namespace playcall
