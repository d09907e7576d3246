#include "partnr/dataset.hpp"

#include <fstream>
#include <ostream>
#include <string>

#include "partnr/error.hpp"

namespace partnr {

void Dataset::append(DatasetEntry entry) {
  const Image& img = entry.observation.image;
  if (!img.contains(entry.action.pick) || !img.contains(entry.action.place)) {
    throw InvalidInput("dataset entry action is outside the image");
  }
  const std::size_t index = entries_.size();
  if (entry.trains(Role::kPick)) examples_.push_back({index, Role::kPick});
  if (entry.trains(Role::kPlace)) examples_.push_back({index, Role::kPlace});
  entries_.push_back(std::move(entry));
}

void Dataset::truncate(std::size_t size) {
  if (size >= entries_.size()) return;
  entries_.resize(size);
  while (!examples_.empty() && examples_.back().entry >= size) examples_.pop_back();
}

std::string_view to_string(Phase phase) { return phase == Phase::kOffline ? "offline" : "interactive"; }

std::string_view to_string(RoleMask roles) {
  switch (roles) {
    case RoleMask::kBoth: return "both";
    case RoleMask::kPickOnly: return "pick";
    case RoleMask::kPlaceOnly: return "place";
  }
  return "?";
}

nlohmann::json to_json(const DatasetEntry& entry) {
  const Image& img = entry.observation.image;
  return {{"width", img.width()},
          {"height", img.height()},
          {"image", base64_encode(img.bytes())},
          {"command", entry.observation.command.text()},
          {"pick", {entry.action.pick.u, entry.action.pick.v}},
          {"place", {entry.action.place.u, entry.action.place.v}},
          {"phase", std::string(to_string(entry.phase))},
          {"roles", std::string(to_string(entry.roles))}};
}

DatasetEntry entry_from_json(const nlohmann::json& j) {
  DatasetEntry e;
  const int w = j.at("width").get<int>();
  const int h = j.at("height").get<int>();
  e.observation.image = Image(w, h, base64_decode(j.at("image").get<std::string>()));
  e.observation.command = parse_command(j.at("command").get<std::string>());
  e.action.pick = {j.at("pick")[0].get<int>(), j.at("pick")[1].get<int>()};
  e.action.place = {j.at("place")[0].get<int>(), j.at("place")[1].get<int>()};
  const auto phase = j.value("phase", std::string("offline"));
  if (phase == "offline") {
    e.phase = Phase::kOffline;
  } else if (phase == "interactive") {
    e.phase = Phase::kInteractive;
  } else {
    throw InvalidInput("unknown phase '" + phase + "'");
  }
  const auto roles = j.value("roles", std::string("both"));
  if (roles == "both") {
    e.roles = RoleMask::kBoth;
  } else if (roles == "pick") {
    e.roles = RoleMask::kPickOnly;
  } else if (roles == "place") {
    e.roles = RoleMask::kPlaceOnly;
  } else {
    throw InvalidInput("unknown roles '" + roles + "'");
  }
  return e;
}

void write_ndjson(const Dataset& dataset, std::ostream& out) {
  for (const auto& e : dataset.entries()) out << to_json(e).dump() << '\n';
}

void save_dataset(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  write_ndjson(dataset, out);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  Dataset d;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      d.append(entry_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw InvalidInput(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return d;
}

}  // namespace partnr
