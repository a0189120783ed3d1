#pragma once

#include <string_view>

namespace fwp {

enum class LogLevel { Debug = 0, Info = 1, Warning = 2, Silent = 3 };

// Messages below the threshold are dropped. Default is Warning.
void set_log_level(LogLevel level);
LogLevel log_level();

void log_info(std::string_view message);
void log_warning(std::string_view message);

}  // namespace fwp
