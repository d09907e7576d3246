#include "partnr/types.hpp"

#include <string>

#include "partnr/error.hpp"

namespace partnr {

std::string_view to_string(Role role) {
  return role == Role::kPick ? "pick" : "place";
}

std::string_view to_string(Verdict verdict) {
  return verdict == Verdict::kAmbiguous ? "ambiguous" : "confident";
}

std::string_view to_string(Flag flag) {
  switch (flag) {
    case Flag::kTP: return "TP";
    case Flag::kTN: return "TN";
    case Flag::kFP: return "FP";
    case Flag::kFN: return "FN";
  }
  return "?";
}

Role parse_role(std::string_view text) {
  if (text == "pick") return Role::kPick;
  if (text == "place") return Role::kPlace;
  throw InvalidInput("unknown role '" + std::string(text) + "'");
}

Flag parse_flag(std::string_view text) {
  if (text == "TP") return Flag::kTP;
  if (text == "TN") return Flag::kTN;
  if (text == "FP") return Flag::kFP;
  if (text == "FN") return Flag::kFN;
  throw InvalidInput("unknown flag '" + std::string(text) + "'");
}

}  // namespace partnr
