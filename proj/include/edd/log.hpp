#pragma once

#include <string>

namespace edd::log {

enum class Level { debug, info, warn, quiet };

void set_level(Level level);
void debug(const std::string& msg);
void info(const std::string& msg);
void warn(const std::string& msg);

}  // namespace edd::log
