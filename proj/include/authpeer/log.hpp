#pragma once

#include <string>

namespace authpeer::logging {

enum class Level { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

// Level comes from AUTHPEER_LOG (error|warn|info|debug) unless set explicitly.
void set_level(Level level);
Level level();

void log(Level level, const std::string& msg);

inline void error(const std::string& msg) { log(Level::kError, msg); }
inline void warn(const std::string& msg) { log(Level::kWarn, msg); }
inline void info(const std::string& msg) { log(Level::kInfo, msg); }
inline void debug(const std::string& msg) { log(Level::kDebug, msg); }

}  // namespace authpeer::logging
