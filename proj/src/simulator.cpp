#include "partnr/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "partnr/error.hpp"

namespace partnr {

namespace {

constexpr int kPlacementGap = 2;

bool in_square(Pixel p, Pixel center, int size) {
  const int lo_u = center.u - size / 2;
  const int lo_v = center.v - size / 2;
  return p.u >= lo_u && p.u < lo_u + size && p.v >= lo_v && p.v < lo_v + size;
}

int clamp_center(int c, int size, int extent) { return std::clamp(c, size / 2, extent - size / 2); }

bool separated(const ObjectSpec& a, const ObjectSpec& b) {
  const int reach = (a.size() + b.size()) / 2 + kPlacementGap;
  return std::abs(a.center.u - b.center.u) >= reach || std::abs(a.center.v - b.center.v) >= reach;
}

void refresh_contents(SceneState& scene) {
  for (auto& obj : scene.objects) {
    if (obj.kind == ObjectKind::kBowl) obj.contains.reset();
  }
  // Topmost box wins when several rest in one bowl.
  std::vector<int> boxes;
  for (int i = 0; i < static_cast<int>(scene.objects.size()); ++i) {
    if (scene.objects[i].kind == ObjectKind::kBox) boxes.push_back(i);
  }
  std::stable_sort(boxes.begin(), boxes.end(),
                   [&](int a, int b) { return scene.objects[a].layer < scene.objects[b].layer; });
  for (int box : boxes) {
    if (auto bowl = scene.bowl_at(scene.objects[box].center)) scene.objects[*bowl].contains = box;
  }
}

void move_box(SceneState& scene, int box, Pixel to) {
  int top = 0;
  for (const auto& o : scene.objects) top = std::max(top, o.layer);
  auto& obj = scene.objects[box];
  obj.center = {clamp_center(to.u, obj.size(), scene.width), clamp_center(to.v, obj.size(), scene.height)};
  obj.layer = top + 1;
  refresh_contents(scene);
}

int uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<int>(0, static_cast<int>(n) - 1)(rng);
}

Pixel clamp_pixel(const SceneState& scene, Pixel p) {
  return {std::clamp(p.u, 0, scene.width - 1), std::clamp(p.v, 0, scene.height - 1)};
}

void check_bounds(const SceneState& scene, Pixel p, const char* what) {
  if (!scene.contains(p)) {
    throw InvalidInput(std::string(what) + " pixel (" + std::to_string(p.u) + ", " + std::to_string(p.v) +
                       ") is outside the image");
  }
}

}  // namespace

bool ObjectSpec::covers(Pixel p) const {
  if (!in_square(p, center, size())) return false;
  if (kind == ObjectKind::kBox) return true;
  return !in_square(p, center, kBowlInner);
}

bool ObjectSpec::within_outline(Pixel p) const { return in_square(p, center, size()); }

std::vector<Pixel> ObjectSpec::footprint() const {
  std::vector<Pixel> out;
  const int s = size();
  for (int v = center.v - s / 2; v < center.v - s / 2 + s; ++v) {
    for (int u = center.u - s / 2; u < center.u - s / 2 + s; ++u) {
      if (covers({u, v})) out.push_back({u, v});
    }
  }
  return out;
}

std::optional<int> SceneState::box_at(Pixel p) const {
  std::optional<int> best;
  for (int i = 0; i < static_cast<int>(objects.size()); ++i) {
    const auto& o = objects[i];
    if (o.kind != ObjectKind::kBox || !o.covers(p)) continue;
    if (!best || o.layer >= objects[*best].layer) best = i;
  }
  return best;
}

std::optional<int> SceneState::bowl_at(Pixel p) const {
  for (int i = 0; i < static_cast<int>(objects.size()); ++i) {
    if (objects[i].kind == ObjectKind::kBowl && objects[i].within_outline(p)) return i;
  }
  return std::nullopt;
}

std::optional<int> SceneState::find(ObjectKind kind, int color) const {
  for (int i = 0; i < static_cast<int>(objects.size()); ++i) {
    if (objects[i].kind == kind && objects[i].color == color) return i;
  }
  return std::nullopt;
}

std::optional<int> SceneState::bowl_holding(int box) const { return bowl_at(objects.at(box).center); }

std::string_view to_string(Scenario scenario) {
  switch (scenario) {
    case Scenario::kNormal: return "normal";
    case Scenario::kFailureA: return "failure_a";
    case Scenario::kFailureB: return "failure_b";
  }
  return "?";
}

Scenario parse_scenario(std::string_view text) {
  if (text == "normal") return Scenario::kNormal;
  if (text == "failure_a") return Scenario::kFailureA;
  if (text == "failure_b") return Scenario::kFailureB;
  throw ConfigError("unknown scenario '" + std::string(text) + "'");
}

std::string_view to_string(StateKind kind) {
  switch (kind) {
    case StateKind::kNormal: return "normal";
    case StateKind::kFailureA: return "failure_a";
    case StateKind::kFailureB: return "failure_b";
  }
  return "?";
}

std::pair<SceneState, Command> reset(std::uint64_t seed, ColorMode mode, Scenario scenario,
                                     const SimConfig& cfg) {
  if (cfg.width < 3 * kBowlOuter || cfg.height < 3 * kBowlOuter) {
    throw InvalidInput("scene must be at least 30x30 pixels");
  }
  Rng rng = make_rng(seed, "scene");
  SceneState scene;
  scene.width = cfg.width;
  scene.height = cfg.height;
  scene.rng_seed = seed;

  auto box_colors = palette(mode);
  auto bowl_colors = box_colors;
  std::shuffle(box_colors.begin(), box_colors.end(), rng);
  std::shuffle(bowl_colors.begin(), bowl_colors.end(), rng);

  std::vector<ObjectSpec> objects;
  for (int i = 0; i < 3; ++i) objects.push_back({ObjectKind::kBowl, bowl_colors[i], {}, std::nullopt, 0});
  for (int i = 0; i < 3; ++i) objects.push_back({ObjectKind::kBox, box_colors[i], {}, std::nullopt, 1});

  for (bool placed = false; !placed;) {
    placed = true;
    for (std::size_t i = 0; i < objects.size() && placed; ++i) {
      auto& obj = objects[i];
      const int half = obj.size() / 2;
      std::uniform_int_distribution<int> du(half, cfg.width - half);
      std::uniform_int_distribution<int> dv(half, cfg.height - half);
      bool ok = false;
      for (int attempt = 0; attempt < 200 && !ok; ++attempt) {
        obj.center = {du(rng), dv(rng)};
        ok = std::all_of(objects.begin(), objects.begin() + static_cast<std::ptrdiff_t>(i),
                         [&](const ObjectSpec& other) { return separated(obj, other); });
      }
      placed = ok;
    }
  }
  scene.objects = std::move(objects);

  Command command;
  command.pick_color = box_colors[uniform_index(rng, 3)];
  command.place_color = bowl_colors[uniform_index(rng, 3)];

  const int target_box = *scene.find(ObjectKind::kBox, command.pick_color);
  const int target_bowl = *scene.find(ObjectKind::kBowl, command.place_color);
  if (scenario == Scenario::kFailureA) {
    std::vector<int> others;
    for (int b = 0; b < 3; ++b) {
      if (b != target_bowl) others.push_back(b);
    }
    const int bowl = others[uniform_index(rng, others.size())];
    move_box(scene, target_box, scene.objects[bowl].center);
  } else if (scenario == Scenario::kFailureB) {
    std::vector<int> others;
    for (int b = 3; b < 6; ++b) {
      if (b != target_box) others.push_back(b);
    }
    const int box = others[uniform_index(rng, others.size())];
    move_box(scene, box, scene.objects[target_bowl].center);
  }
  refresh_contents(scene);
  return {std::move(scene), command};
}

Image render(const SceneState& scene) {
  Image image(scene.width, scene.height, kBackground);
  auto draw = [&](const ObjectSpec& obj) {
    const Rgb8 rgb = color_rgb(obj.color);
    for (Pixel p : obj.footprint()) {
      if (image.contains(p)) image.set(p.u, p.v, rgb);
    }
  };
  for (const auto& obj : scene.objects) {
    if (obj.kind == ObjectKind::kBowl) draw(obj);
  }
  std::vector<int> boxes;
  for (int i = 0; i < static_cast<int>(scene.objects.size()); ++i) {
    if (scene.objects[i].kind == ObjectKind::kBox) boxes.push_back(i);
  }
  std::stable_sort(boxes.begin(), boxes.end(),
                   [&](int a, int b) { return scene.objects[a].layer < scene.objects[b].layer; });
  for (int b : boxes) draw(scene.objects[b]);
  return image;
}

std::pair<SceneState, StepResult> step(const SceneState& scene, const Command& command,
                                       const Action& action) {
  check_bounds(scene, action.pick, "pick");
  check_bounds(scene, action.place, "place");
  SceneState next = scene;
  StepResult result;
  const auto box = scene.box_at(action.pick);
  if (!box) return {std::move(next), result};

  ++next.step_count;
  result.pick_valid = true;
  result.picked = box;
  move_box(next, *box, action.place);
  const auto target_bowl = scene.find(ObjectKind::kBowl, command.place_color);
  result.place_success = scene.objects[*box].color == command.pick_color && target_bowl &&
                         scene.objects[*target_bowl].within_outline(action.place);
  return {std::move(next), result};
}

Pixel scripted_expert_pixel(const SceneState& scene, const Command& command, Role role,
                            double noise_sigma, Rng& rng) {
  const auto kind = role == Role::kPick ? ObjectKind::kBox : ObjectKind::kBowl;
  const int color = role == Role::kPick ? command.pick_color : command.place_color;
  const auto target = scene.find(kind, color);
  if (!target) {
    throw InvalidInput(std::string("commanded ") + (role == Role::kPick ? "box" : "bowl") + " '" +
                       std::string(color_name(color)) + "' is not in the scene");
  }
  Pixel p = scene.objects[*target].center;
  if (noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, noise_sigma);
    p.u += static_cast<int>(std::lround(noise(rng)));
    p.v += static_cast<int>(std::lround(noise(rng)));
  }
  return clamp_pixel(scene, p);
}

Action scripted_expert(const SceneState& scene, const Command& command, double noise_sigma, Rng& rng) {
  Action a;
  a.pick = scripted_expert_pixel(scene, command, Role::kPick, noise_sigma, rng);
  a.place = scripted_expert_pixel(scene, command, Role::kPlace, noise_sigma, rng);
  return a;
}

bool necessity_oracle(const SceneState& scene, const Command& command, Pixel proposed, Role role) {
  if (!scene.contains(proposed)) return true;
  if (role == Role::kPick) {
    const auto box = scene.box_at(proposed);
    return !box || scene.objects[*box].color != command.pick_color;
  }
  const auto target = scene.find(ObjectKind::kBowl, command.place_color);
  return !target || !scene.objects[*target].within_outline(proposed);
}

std::optional<Pixel> correction_oracle(const SceneState& scene, const Command& command, Pixel executed,
                                       Role role, double noise_sigma, Rng& rng) {
  if (!necessity_oracle(scene, command, executed, role)) return std::nullopt;
  return scripted_expert_pixel(scene, command, role, noise_sigma, rng);
}

StateKind classify_state(const SceneState& scene, const Command& command) {
  const auto box = scene.find(ObjectKind::kBox, command.pick_color);
  const auto bowl = scene.find(ObjectKind::kBowl, command.place_color);
  if (!box || !bowl) return StateKind::kNormal;
  const auto holder = scene.bowl_holding(*box);
  if (holder && *holder != *bowl) return StateKind::kFailureA;
  const auto& contents = scene.objects[*bowl].contains;
  if (contents && *contents != *box) return StateKind::kFailureB;
  return StateKind::kNormal;
}

Command next_command(const SceneState& scene, const std::optional<std::pair<Command, bool>>& previous,
                     Rng& rng) {
  if (previous && !previous->second) return previous->first;
  std::vector<int> free_boxes, all_boxes, empty_bowls, all_bowls;
  for (int i = 0; i < static_cast<int>(scene.objects.size()); ++i) {
    const auto& o = scene.objects[i];
    if (o.kind == ObjectKind::kBox) {
      all_boxes.push_back(o.color);
      if (!scene.bowl_holding(i)) free_boxes.push_back(o.color);
    } else {
      all_bowls.push_back(o.color);
      if (!o.contains) empty_bowls.push_back(o.color);
    }
  }
  const auto& boxes = free_boxes.empty() ? all_boxes : free_boxes;
  const auto& bowls = empty_bowls.empty() ? all_bowls : empty_bowls;
  Command c;
  c.pick_color = boxes[uniform_index(rng, boxes.size())];
  c.place_color = bowls[uniform_index(rng, bowls.size())];
  return c;
}

nlohmann::json to_json(const SceneState& scene) {
  auto objects = nlohmann::json::array();
  for (const auto& o : scene.objects) {
    nlohmann::json j = {{"kind", o.kind == ObjectKind::kBox ? "box" : "bowl"},
                        {"color", std::string(color_name(o.color))},
                        {"center", {o.center.u, o.center.v}},
                        {"layer", o.layer}};
    j["contains"] = o.contains ? nlohmann::json(*o.contains) : nlohmann::json(nullptr);
    objects.push_back(std::move(j));
  }
  return {{"width", scene.width},       {"height", scene.height},
          {"rng_seed", scene.rng_seed}, {"step_count", scene.step_count},
          {"objects", std::move(objects)}};
}

SceneState scene_from_json(const nlohmann::json& j) {
  SceneState s;
  s.width = j.at("width").get<int>();
  s.height = j.at("height").get<int>();
  s.rng_seed = j.value("rng_seed", std::uint64_t{0});
  s.step_count = j.value("step_count", 0);
  for (const auto& o : j.at("objects")) {
    ObjectSpec obj;
    obj.kind = o.at("kind").get<std::string>() == "box" ? ObjectKind::kBox : ObjectKind::kBowl;
    obj.color = color_index(o.at("color").get<std::string>());
    obj.center = {o.at("center")[0].get<int>(), o.at("center")[1].get<int>()};
    obj.layer = o.value("layer", 0);
    if (o.contains("contains") && !o["contains"].is_null()) obj.contains = o["contains"].get<int>();
    s.objects.push_back(obj);
  }
  return s;
}

}  // namespace partnr
