#pragma once

#include <string>
#include <string_view>

#include "partnr/image.hpp"

namespace partnr {

// "Pick the <pick> box and place it in the <place> bowl."
struct Command {
  int pick_color = 0;
  int place_color = 0;

  std::string text() const;
  friend bool operator==(const Command&, const Command&) = default;
};

// Inverse of Command::text. Throws InvalidInput on template mismatch and
// UnknownToken on an unknown color.
Command parse_command(std::string_view text);

struct Observation {
  Image image;
  Command command;
};

struct Action {
  Pixel pick;
  Pixel place;
  friend bool operator==(const Action&, const Action&) = default;
};

}  // namespace partnr
