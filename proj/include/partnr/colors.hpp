#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace partnr {

struct Rgb8 {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb8&, const Rgb8&) = default;
};

enum class ColorGroup { kAll, kSeen, kUnseen };

struct ColorToken {
  std::string_view name;
  Rgb8 rgb;
  ColorGroup group;
};

inline constexpr Rgb8 kBackground{128, 128, 128};

// Unseen colors sit near seen ones (orange between red and yellow, pink near
// red, purple near blue, white near gray) so domain shift produces ambiguity.
inline constexpr std::array<ColorToken, 11> kColorTokens{{
    {"red", {220, 30, 30}, ColorGroup::kAll},
    {"blue", {30, 60, 220}, ColorGroup::kAll},
    {"green", {30, 180, 50}, ColorGroup::kAll},
    {"yellow", {240, 220, 30}, ColorGroup::kSeen},
    {"brown", {140, 90, 40}, ColorGroup::kSeen},
    {"gray", {190, 190, 190}, ColorGroup::kSeen},
    {"cyan", {30, 200, 215}, ColorGroup::kSeen},
    {"orange", {240, 140, 30}, ColorGroup::kUnseen},
    {"purple", {140, 40, 180}, ColorGroup::kUnseen},
    {"pink", {240, 140, 180}, ColorGroup::kUnseen},
    {"white", {245, 245, 245}, ColorGroup::kUnseen},
}};

inline constexpr int kNumColors = static_cast<int>(kColorTokens.size());

enum class ColorMode { kSeen, kUnseen };

// Throws UnknownToken.
int color_index(std::string_view name);
std::string_view color_name(int index);
Rgb8 color_rgb(int index);

// C_all u C_seen or C_all u C_unseen, in vocabulary order.
std::vector<int> palette(ColorMode mode);

std::string_view to_string(ColorMode mode);
ColorMode parse_color_mode(std::string_view text);

}  // namespace partnr
