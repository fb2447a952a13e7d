#ifndef FIELDSPACE_TIME_HPP_
#define FIELDSPACE_TIME_HPP_

#include <chrono>
#include <string>
#include <string_view>

namespace fieldspace {

/// UTC instant with one-second resolution.
using Timestamp = std::chrono::sys_seconds;

/// Accepts "YYYY-MM-DDTHH:MM:SSZ", a trailing "+HH:MM"/"-HH:MM" offset in
/// place of "Z", or a decimal count of seconds since the Unix epoch.
/// Throws std::invalid_argument on anything else.
Timestamp parse_timestamp(std::string_view text);

/// "YYYY-MM-DDTHH:MM:SSZ"
std::string format_timestamp(Timestamp t);

/// "HH:MM" or "HH:MM:SS" to seconds after midnight, in [0, 86400).
int parse_time_of_day(std::string_view text);
std::string format_time_of_day(int seconds);

/// Current wall-clock time truncated to seconds.
Timestamp now_utc();

}  // namespace fieldspace

#endif  // FIELDSPACE_TIME_HPP_
