#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "partnr/command.hpp"
#include "partnr/rng.hpp"

namespace partnr {

enum class ObjectKind { kBox, kBowl };
enum class Scenario { kNormal, kFailureA, kFailureB };

inline constexpr int kBoxSize = 6;
inline constexpr int kBowlOuter = 10;
inline constexpr int kBowlInner = 6;

// Box: filled 6x6 square. Bowl: 10x10 ring around a 6x6 hole. An object of
// even size S centered at c spans [c - S/2, c + S/2 - 1] on each axis.
struct ObjectSpec {
  ObjectKind kind = ObjectKind::kBox;
  int color = 0;
  Pixel center;
  // Bowls: the box resting in this bowl, if any (index into SceneState::objects).
  std::optional<int> contains;
  // Draw order among boxes; a moved box goes on top.
  int layer = 0;

  int size() const { return kind == ObjectKind::kBox ? kBoxSize : kBowlOuter; }
  // Drawn pixels: the full square for a box, the ring for a bowl.
  bool covers(Pixel p) const;
  // Full outline: ring or hole for a bowl, the square for a box.
  bool within_outline(Pixel p) const;
  std::vector<Pixel> footprint() const;

  friend bool operator==(const ObjectSpec&, const ObjectSpec&) = default;
};

struct SceneState {
  int width = 64;
  int height = 64;
  std::vector<ObjectSpec> objects;
  std::uint64_t rng_seed = 0;
  int step_count = 0;

  bool contains(Pixel p) const { return p.u >= 0 && p.v >= 0 && p.u < width && p.v < height; }
  // Topmost box drawn at p.
  std::optional<int> box_at(Pixel p) const;
  // Bowl whose outline contains p.
  std::optional<int> bowl_at(Pixel p) const;
  // Unique box / bowl of that color.
  std::optional<int> find(ObjectKind kind, int color) const;
  // Bowl whose outline holds the box center.
  std::optional<int> bowl_holding(int box) const;

  friend bool operator==(const SceneState&, const SceneState&) = default;
};

struct SimConfig {
  int width = 64;
  int height = 64;
};

struct StepResult {
  bool pick_valid = false;
  bool place_success = false;
  std::optional<int> picked;
};

// Scene configuration relative to a command.
enum class StateKind { kNormal, kFailureA, kFailureB };

std::string_view to_string(Scenario scenario);
Scenario parse_scenario(std::string_view text);
std::string_view to_string(StateKind kind);

// Three boxes and three bowls, colors drawn without replacement from the
// mode's palette (boxes and bowls independently), command colors drawn from
// the objects present. failure_a starts with the commanded box resting in a
// non-target bowl; failure_b with another box resting in the target bowl.
std::pair<SceneState, Command> reset(std::uint64_t seed, ColorMode mode, Scenario scenario,
                                     const SimConfig& cfg = {});

// Background first, then bowls, then boxes by layer.
Image render(const SceneState& scene);

// Throws InvalidInput on out-of-bounds pixels. An invalid pick leaves the
// scene unchanged; a valid one moves the box center to the place pixel
// (clamped so the box stays on the table).
std::pair<SceneState, StepResult> step(const SceneState& scene, const Command& command,
                                       const Action& action);

// Commanded box center and commanded bowl center, each perturbed by rounded
// N(0, sigma^2) noise per axis and clamped in bounds. Throws InvalidInput if
// a commanded color is absent.
Action scripted_expert(const SceneState& scene, const Command& command, double noise_sigma, Rng& rng);
Pixel scripted_expert_pixel(const SceneState& scene, const Command& command, Role role,
                            double noise_sigma, Rng& rng);

// True iff the pixel would not satisfy the success predicate for the role.
bool necessity_oracle(const SceneState& scene, const Command& command, Pixel proposed, Role role);

// The expert's pixel when the executed pixel needed correcting.
std::optional<Pixel> correction_oracle(const SceneState& scene, const Command& command, Pixel executed,
                                       Role role, double noise_sigma, Rng& rng);

StateKind classify_state(const SceneState& scene, const Command& command);

// Next command of an episode. A failed command is issued again on the
// resulting scene; otherwise the pick color comes from boxes not resting in a
// bowl and the place color from empty bowls (any box / bowl if none is left).
Command next_command(const SceneState& scene, const std::optional<std::pair<Command, bool>>& previous,
                     Rng& rng);

nlohmann::json to_json(const SceneState& scene);
SceneState scene_from_json(const nlohmann::json& j);

}  // namespace partnr
