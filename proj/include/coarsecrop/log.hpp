#pragma once

#include <string_view>

namespace coarsecrop::log {

/// Reads COARSECROP_LOG (trace, debug, info, warn, error, off). Defaults to warn.
void init_from_env();

void debug(std::string_view msg);
void info(std::string_view msg);
void warn(std::string_view msg);
void error(std::string_view msg);

}  // namespace coarsecrop::log
