#include "fieldspace/time.hpp"

#include <charconv>
#include <cstdio>
#include <stdexcept>

namespace fieldspace {

namespace {

int parse_fixed(std::string_view text, std::size_t pos, std::size_t len) {
  if (pos + len > text.size()) {
    throw std::invalid_argument("timestamp truncated");
  }
  int value = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    const char c = text[i];
    if (c < '0' || c > '9') {
      throw std::invalid_argument("expected digit in time value '" + std::string(text) + "'");
    }
    value = value * 10 + (c - '0');
  }
  return value;
}

void expect_char(std::string_view text, std::size_t pos, char c) {
  if (pos >= text.size() || text[pos] != c) {
    throw std::invalid_argument("malformed time value '" + std::string(text) + "'");
  }
}

}  // namespace

Timestamp parse_timestamp(std::string_view text) {
  if (text.empty()) {
    throw std::invalid_argument("empty timestamp");
  }
  if (text.find('T') == std::string_view::npos) {
    long long seconds = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), seconds);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
      throw std::invalid_argument("malformed timestamp '" + std::string(text) + "'");
    }
    return Timestamp{std::chrono::seconds{seconds}};
  }
  using namespace std::chrono;
  const int y = parse_fixed(text, 0, 4);
  expect_char(text, 4, '-');
  const int mo = parse_fixed(text, 5, 2);
  expect_char(text, 7, '-');
  const int d = parse_fixed(text, 8, 2);
  expect_char(text, 10, 'T');
  const int hh = parse_fixed(text, 11, 2);
  expect_char(text, 13, ':');
  const int mm = parse_fixed(text, 14, 2);
  expect_char(text, 16, ':');
  const int ss = parse_fixed(text, 17, 2);
  int offset_minutes = 0;
  if (text.size() == 20 && text[19] == 'Z') {
    offset_minutes = 0;
  } else if (text.size() == 25 && (text[19] == '+' || text[19] == '-')) {
    expect_char(text, 22, ':');
    offset_minutes = parse_fixed(text, 20, 2) * 60 + parse_fixed(text, 23, 2);
    if (text[19] == '-') offset_minutes = -offset_minutes;
  } else {
    throw std::invalid_argument("timestamp needs a 'Z' or numeric UTC offset: '" +
                                std::string(text) + "'");
  }
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                           day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || hh > 23 || mm > 59 || ss > 59) {
    throw std::invalid_argument("timestamp out of range: '" + std::string(text) + "'");
  }
  return sys_days{ymd} + hours{hh} + minutes{mm} + seconds{ss} - minutes{offset_minutes};
}

std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  const sys_days day_start = floor<days>(t);
  const year_month_day ymd{day_start};
  const auto secs = static_cast<unsigned>((t - day_start).count());
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02u:%02u:%02uZ", int(ymd.year()),
                unsigned(ymd.month()), unsigned(ymd.day()), secs / 3600, (secs / 60) % 60,
                secs % 60);
  return buf;
}

int parse_time_of_day(std::string_view text) {
  if (text.size() != 5 && text.size() != 8) {
    throw std::invalid_argument("time of day must be HH:MM or HH:MM:SS");
  }
  const int hh = parse_fixed(text, 0, 2);
  expect_char(text, 2, ':');
  const int mm = parse_fixed(text, 3, 2);
  int ss = 0;
  if (text.size() == 8) {
    expect_char(text, 5, ':');
    ss = parse_fixed(text, 6, 2);
  }
  if (hh > 23 || mm > 59 || ss > 59) {
    throw std::invalid_argument("time of day out of range: '" + std::string(text) + "'");
  }
  return hh * 3600 + mm * 60 + ss;
}

std::string format_time_of_day(int seconds) {
  char buf[16];
  if (seconds % 60 == 0) {
    std::snprintf(buf, sizeof buf, "%02d:%02d", seconds / 3600, (seconds / 60) % 60);
  } else {
    std::snprintf(buf, sizeof buf, "%02d:%02d:%02d", seconds / 3600, (seconds / 60) % 60,
                  seconds % 60);
  }
  return buf;
}

Timestamp now_utc() {
  return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
}

}  // namespace fieldspace
