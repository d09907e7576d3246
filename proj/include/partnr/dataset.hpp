#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "partnr/command.hpp"

namespace partnr {

enum class Phase { kOffline, kInteractive };

// Which heads an entry trains. Interactive queries and corrections label a
// single role; for place-only entries action.pick is the executed pick the
// place was conditioned on.
enum class RoleMask { kBoth, kPickOnly, kPlaceOnly };

struct DatasetEntry {
  Observation observation;
  Action action;
  Phase phase = Phase::kOffline;
  RoleMask roles = RoleMask::kBoth;

  bool trains(Role role) const {
    return roles == RoleMask::kBoth || (role == Role::kPick ? roles == RoleMask::kPickOnly
                                                            : roles == RoleMask::kPlaceOnly);
  }
};

// A single (entry, role) training target.
struct ExampleRef {
  std::size_t entry;
  Role role;
};

// Append-only aggregate of demonstrations.
class Dataset {
 public:
  // Throws InvalidInput when an action pixel lies outside the image.
  void append(DatasetEntry entry);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const DatasetEntry& operator[](std::size_t i) const { return entries_[i]; }
  const std::vector<DatasetEntry>& entries() const { return entries_; }

  // Entry-ordered, pick before place.
  const std::vector<ExampleRef>& examples() const { return examples_; }

  void truncate(std::size_t size);

 private:
  std::vector<DatasetEntry> entries_;
  std::vector<ExampleRef> examples_;
};

std::string_view to_string(Phase phase);
std::string_view to_string(RoleMask roles);

// One JSON object per line:
// {"width","height","image": base64 RGB bytes,"command","pick":[u,v],"place":[u,v],"phase","roles"}
nlohmann::json to_json(const DatasetEntry& entry);
DatasetEntry entry_from_json(const nlohmann::json& j);

void write_ndjson(const Dataset& dataset, std::ostream& out);
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace partnr
