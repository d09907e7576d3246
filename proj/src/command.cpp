#include "partnr/command.hpp"

#include <string>

#include "partnr/error.hpp"

namespace partnr {
namespace {
constexpr std::string_view kPrefix = "Pick the ";
constexpr std::string_view kMiddle = " box and place it in the ";
constexpr std::string_view kSuffix = " bowl.";
}  // namespace

std::string Command::text() const {
  std::string out(kPrefix);
  out += color_name(pick_color);
  out += kMiddle;
  out += color_name(place_color);
  out += kSuffix;
  return out;
}

Command parse_command(std::string_view text) {
  if (!text.starts_with(kPrefix) || !text.ends_with(kSuffix)) {
    throw InvalidInput("command does not match the pick-and-place template");
  }
  text.remove_prefix(kPrefix.size());
  text.remove_suffix(kSuffix.size());
  const auto mid = text.find(kMiddle);
  if (mid == std::string_view::npos) throw InvalidInput("command does not match the pick-and-place template");
  Command c;
  c.pick_color = color_index(text.substr(0, mid));
  c.place_color = color_index(text.substr(mid + kMiddle.size()));
  return c;
}

}  // namespace partnr
