#include "edd/log.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace edd::log {

namespace {

spdlog::logger& logger() {
  static auto l = [] {
    auto lg = spdlog::stderr_color_mt("edd");
    lg->set_pattern("[%l] %v");
    lg->set_level(spdlog::level::warn);
    return lg;
  }();
  return *l;
}

}  // namespace

void set_level(Level level) {
  switch (level) {
    case Level::debug: logger().set_level(spdlog::level::debug); break;
    case Level::info: logger().set_level(spdlog::level::info); break;
    case Level::warn: logger().set_level(spdlog::level::warn); break;
    case Level::quiet: logger().set_level(spdlog::level::off); break;
  }
}

void debug(const std::string& msg) { logger().debug(msg); }
void info(const std::string& msg) { logger().info(msg); }
void warn(const std::string& msg) { logger().warn(msg); }

}  // namespace edd::log
