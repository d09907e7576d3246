#pragma once

#include <compare>
#include <cstdint>
#include <string_view>

namespace partnr {

// Image coordinate: u is the column, v the row.
struct Pixel {
  int u = 0;
  int v = 0;

  friend bool operator==(const Pixel&, const Pixel&) = default;
  // Row-major order: (v, u) lexicographic.
  friend std::strong_ordering operator<=>(const Pixel& a, const Pixel& b) {
    if (auto c = a.v <=> b.v; c != 0) return c;
    return a.u <=> b.u;
  }
};

enum class Role { kPick, kPlace };
inline constexpr Role kRoles[] = {Role::kPick, Role::kPlace};

enum class Verdict { kAmbiguous, kConfident };

// Confusion flags; see ConfusionLedger for their meaning.
enum class Flag { kTP, kTN, kFP, kFN };

std::string_view to_string(Role role);
std::string_view to_string(Verdict verdict);
std::string_view to_string(Flag flag);

Role parse_role(std::string_view text);
Flag parse_flag(std::string_view text);

}  // namespace partnr
