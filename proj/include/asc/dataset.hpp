#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "asc/error.hpp"

namespace asc {

enum class Scene { Indoor, Outdoor };

enum class Subclass {
  MetroStation,
  ShoppingMall,
  Airport,
  Park,
  PedestrianStreet,
  PublicSquare,
};

inline constexpr std::array<Subclass, 6> kAllSubclasses = {
    Subclass::MetroStation,   Subclass::ShoppingMall,    Subclass::Airport,
    Subclass::Park,           Subclass::PedestrianStreet, Subclass::PublicSquare,
};

Scene scene_of(Subclass s);
std::string subclass_name(Subclass s);   // snake_case, used in paths and manifests
std::string subclass_label(Subclass s);  // display form, e.g. "Metro Station"
std::string scene_name(Scene s);
std::string scene_label(Scene s);
Subclass parse_subclass(const std::string& name);  // accepts the snake_case form

enum class SplitAssignment { Unassigned, Train, Test };

struct ManifestEntry {
  std::string path;  // relative to the manifest file's directory
  Subclass subclass = Subclass::MetroStation;
  SplitAssignment split = SplitAssignment::Unassigned;
  bool augmented = false;
  std::string parent_id;  // originating recording; the split-group key

  Scene scene() const { return scene_of(subclass); }
  // Entry identity: the path stem. Also the RNG stream key for augmentation.
  std::string id() const { return std::filesystem::path(path).stem().string(); }
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  size_t size() const { return entries.size(); }
};

// Directory mode: root/<subclass>/*.wav, one directory per subclass.
// Index mode (root is a regular file): lines of "path,subclass_name";
// '#' starts a comment.
DatasetManifest build_manifest(const std::filesystem::path& root);

struct BalanceReport {
  std::map<Subclass, size_t> counts;  // all six subclasses, zero included
  bool balanced = false;
  bool empty = false;
  std::vector<Subclass> deficient;  // strictly below the max count
};

BalanceReport check_balance(const DatasetManifest& manifest);

// Group-aware 80/20-style split: a parent recording and everything derived
// from it (segments, augmented variants) land in one split. Per subclass,
// the number of test parent groups follows largest-remainder allocation of
// test_fraction; group selection is a seeded shuffle.
DatasetManifest split_train_test(const DatasetManifest& manifest, double test_fraction,
                                 uint64_t seed);

struct AccountingRow {
  std::string label;
  size_t count = 0;
  double hours = 0.0;
};

// Dataset size at each pipeline stage, in files and hours of audio.
struct AccountingReport {
  size_t parent_recordings = 0;
  double parent_hours = 0.0;
  std::map<Subclass, size_t> parents_per_subclass;
  std::map<Scene, size_t> unaugmented_per_scene;
  std::map<Scene, double> unaugmented_hours_per_scene;
  std::map<Scene, size_t> total_per_scene;
  std::map<Scene, double> total_hours_per_scene;
  std::map<Scene, size_t> test_per_scene;
  std::map<Scene, size_t> train_per_scene;
  size_t total_entries = 0;
  double total_hours = 0.0;
  std::vector<AccountingRow> rows;  // rendered view of the fields above
};

AccountingReport table1_accounting(const DatasetManifest& manifest, double clip_seconds);

std::string render_accounting(const AccountingReport& report);

// JSON-lines persistence; fields per record:
// path, scene, subclass, split, augmented, parent_id.
std::string serialize_manifest(const DatasetManifest& manifest);
DatasetManifest parse_manifest(const std::string& text);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& path);

}  // namespace asc
