#include "partnr/colors.hpp"

#include <string>

#include "partnr/error.hpp"

namespace partnr {

int color_index(std::string_view name) {
  for (int i = 0; i < kNumColors; ++i) {
    if (kColorTokens[i].name == name) return i;
  }
  throw UnknownToken("unknown color token '" + std::string(name) + "'");
}

std::string_view color_name(int index) {
  if (index < 0 || index >= kNumColors) throw UnknownToken("color index out of range");
  return kColorTokens[index].name;
}

Rgb8 color_rgb(int index) {
  if (index < 0 || index >= kNumColors) throw UnknownToken("color index out of range");
  return kColorTokens[index].rgb;
}

std::vector<int> palette(ColorMode mode) {
  const ColorGroup extra = mode == ColorMode::kSeen ? ColorGroup::kSeen : ColorGroup::kUnseen;
  std::vector<int> out;
  for (int i = 0; i < kNumColors; ++i) {
    if (kColorTokens[i].group == ColorGroup::kAll || kColorTokens[i].group == extra) out.push_back(i);
  }
  return out;
}

std::string_view to_string(ColorMode mode) { return mode == ColorMode::kSeen ? "seen" : "unseen"; }

ColorMode parse_color_mode(std::string_view text) {
  if (text == "seen") return ColorMode::kSeen;
  if (text == "unseen") return ColorMode::kUnseen;
  throw ConfigError("mode must be 'seen' or 'unseen', got '" + std::string(text) + "'");
}

}  // namespace partnr
