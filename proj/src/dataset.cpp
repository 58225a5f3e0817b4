#include "asc/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "asc/rng.hpp"

namespace asc {
namespace {

using nlohmann::json;

std::string split_name(SplitAssignment s) {
  switch (s) {
    case SplitAssignment::Train: return "train";
    case SplitAssignment::Test: return "test";
    default: return "unassigned";
  }
}

SplitAssignment parse_split(const std::string& s) {
  if (s == "train") return SplitAssignment::Train;
  if (s == "test") return SplitAssignment::Test;
  if (s == "unassigned") return SplitAssignment::Unassigned;
  throw FormatError("manifest: unknown split '" + s + "'");
}

}  // namespace

Scene scene_of(Subclass s) {
  switch (s) {
    case Subclass::MetroStation:
    case Subclass::ShoppingMall:
    case Subclass::Airport: return Scene::Indoor;
    default: return Scene::Outdoor;
  }
}

std::string subclass_name(Subclass s) {
  switch (s) {
    case Subclass::MetroStation: return "metro_station";
    case Subclass::ShoppingMall: return "shopping_mall";
    case Subclass::Airport: return "airport";
    case Subclass::Park: return "park";
    case Subclass::PedestrianStreet: return "pedestrian_street";
    case Subclass::PublicSquare: return "public_square";
  }
  throw ArgumentError("subclass_name: bad enum value");
}

std::string subclass_label(Subclass s) {
  switch (s) {
    case Subclass::MetroStation: return "Metro Station";
    case Subclass::ShoppingMall: return "Shopping Mall";
    case Subclass::Airport: return "Airport";
    case Subclass::Park: return "Park";
    case Subclass::PedestrianStreet: return "Pedestrian Street";
    case Subclass::PublicSquare: return "Public Square";
  }
  throw ArgumentError("subclass_label: bad enum value");
}

std::string scene_name(Scene s) { return s == Scene::Indoor ? "indoor" : "outdoor"; }
std::string scene_label(Scene s) { return s == Scene::Indoor ? "Indoor" : "Outdoor"; }

Subclass parse_subclass(const std::string& name) {
  for (Subclass s : kAllSubclasses)
    if (subclass_name(s) == name) return s;
  throw FormatError("unknown subclass '" + name + "'");
}

DatasetManifest build_manifest(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::exists(root)) throw IoError("manifest root does not exist: " + root.string());

  DatasetManifest manifest;
  std::set<std::string> seen;
  auto add_entry = [&](const std::string& path, Subclass subclass) {
    if (!seen.insert(path).second)
      throw FormatError("manifest: duplicate path '" + path + "'");
    ManifestEntry e;
    e.path = path;
    e.subclass = subclass;
    e.parent_id = fs::path(path).stem().string();
    manifest.entries.push_back(std::move(e));
  };

  if (fs::is_regular_file(root)) {
    std::ifstream in(root);
    if (!in) throw IoError("cannot open index file " + root.string());
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      const size_t comma = line.rfind(',');
      if (comma == std::string::npos)
        throw FormatError("index file line " + std::to_string(line_no) +
                          ": expected 'path,subclass'");
      add_entry(line.substr(0, comma), parse_subclass(line.substr(comma + 1)));
    }
    return manifest;
  }

  std::vector<fs::path> subdirs;
  for (const auto& de : fs::directory_iterator(root))
    if (de.is_directory()) subdirs.push_back(de.path());
  std::sort(subdirs.begin(), subdirs.end());

  for (const auto& dir : subdirs) {
    const Subclass subclass = parse_subclass(dir.filename().string());
    std::vector<fs::path> files;
    for (const auto& de : fs::directory_iterator(dir))
      if (de.is_regular_file() && de.path().extension() == ".wav")
        files.push_back(de.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files)
      add_entry((dir.filename() / f.filename()).string(), subclass);
  }
  return manifest;
}

BalanceReport check_balance(const DatasetManifest& manifest) {
  BalanceReport report;
  for (Subclass s : kAllSubclasses) report.counts[s] = 0;
  for (const auto& e : manifest.entries) ++report.counts[e.subclass];

  report.empty = manifest.entries.empty();
  size_t max_count = 0;
  for (const auto& [s, c] : report.counts) max_count = std::max(max_count, c);
  report.balanced = true;
  for (const auto& [s, c] : report.counts) {
    if (report.empty) break;
    if (c != max_count) {
      report.balanced = false;
      report.deficient.push_back(s);
    }
  }
  return report;
}

DatasetManifest split_train_test(const DatasetManifest& manifest, double test_fraction,
                                 uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ArgumentError("split_train_test: test_fraction must lie in (0, 1)");
  for (const auto& e : manifest.entries)
    if (e.split != SplitAssignment::Unassigned)
      throw ArgumentError("split_train_test: entry '" + e.path +
                          "' is already assigned to a split");

  // Parent groups per subclass. A parent spanning two subclasses would make
  // the per-subclass quota ambiguous.
  std::map<Subclass, std::vector<std::string>> groups;
  std::map<std::string, Subclass> group_subclass;
  for (const auto& e : manifest.entries) {
    auto [it, inserted] = group_subclass.emplace(e.parent_id, e.subclass);
    if (inserted)
      groups[e.subclass].push_back(e.parent_id);
    else if (it->second != e.subclass)
      throw FormatError("split_train_test: parent '" + e.parent_id +
                        "' appears under two subclasses");
  }

  size_t total_groups = 0;
  for (auto& [s, ids] : groups) total_groups += ids.size();

  // Largest-remainder allocation of test groups across subclasses.
  const double total_quota = test_fraction * static_cast<double>(total_groups);
  std::map<Subclass, size_t> test_quota;
  std::vector<std::pair<double, Subclass>> remainders;
  size_t assigned = 0;
  for (auto& [s, ids] : groups) {
    const double quota = test_fraction * static_cast<double>(ids.size());
    const auto base = static_cast<size_t>(quota);
    test_quota[s] = base;
    assigned += base;
    remainders.emplace_back(quota - static_cast<double>(base), s);
  }
  auto target = static_cast<size_t>(std::llround(total_quota));
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (const auto& [rem, s] : remainders) {
    if (assigned >= target) break;
    if (test_quota[s] < groups[s].size()) {
      ++test_quota[s];
      ++assigned;
    }
  }

  std::map<std::string, SplitAssignment> assignment;
  for (auto& [s, ids] : groups) {
    std::sort(ids.begin(), ids.end());
    Rng rng(seed ^ fnv1a64(subclass_name(s)));
    rng.shuffle(ids);
    for (size_t i = 0; i < ids.size(); ++i)
      assignment[ids[i]] =
          i < test_quota[s] ? SplitAssignment::Test : SplitAssignment::Train;
  }

  DatasetManifest out = manifest;
  for (auto& e : out.entries) e.split = assignment[e.parent_id];
  return out;
}

AccountingReport table1_accounting(const DatasetManifest& manifest, double clip_seconds) {
  AccountingReport r;
  for (Subclass s : kAllSubclasses) r.parents_per_subclass[s] = 0;
  for (Scene s : {Scene::Indoor, Scene::Outdoor}) {
    r.unaugmented_per_scene[s] = 0;
    r.total_per_scene[s] = 0;
    r.test_per_scene[s] = 0;
    r.train_per_scene[s] = 0;
  }

  std::set<std::string> parents;
  std::map<Subclass, std::set<std::string>> parents_by_subclass;
  std::map<Subclass, size_t> unaugmented_by_subclass;
  size_t unaugmented_total = 0;
  for (const auto& e : manifest.entries) {
    parents.insert(e.parent_id);
    parents_by_subclass[e.subclass].insert(e.parent_id);
    ++r.total_per_scene[e.scene()];
    if (!e.augmented) {
      ++r.unaugmented_per_scene[e.scene()];
      ++unaugmented_by_subclass[e.subclass];
      ++unaugmented_total;
    }
    if (e.split == SplitAssignment::Test) ++r.test_per_scene[e.scene()];
    if (e.split == SplitAssignment::Train) ++r.train_per_scene[e.scene()];
  }

  const double hours_per_clip = clip_seconds / 3600.0;
  r.parent_recordings = parents.size();
  r.parent_hours = static_cast<double>(unaugmented_total) * hours_per_clip;
  for (Subclass s : kAllSubclasses)
    r.parents_per_subclass[s] = parents_by_subclass[s].size();
  for (Scene s : {Scene::Indoor, Scene::Outdoor}) {
    r.unaugmented_hours_per_scene[s] =
        static_cast<double>(r.unaugmented_per_scene[s]) * hours_per_clip;
    r.total_hours_per_scene[s] = static_cast<double>(r.total_per_scene[s]) * hours_per_clip;
  }
  r.total_entries = manifest.size();
  r.total_hours = static_cast<double>(r.total_entries) * hours_per_clip;

  r.rows.push_back({"Source recordings", r.parent_recordings, r.parent_hours});
  for (Subclass s : kAllSubclasses)
    if (r.parents_per_subclass[s] > 0)
      r.rows.push_back({"Source recordings: " + subclass_label(s),
                        r.parents_per_subclass[s],
                        static_cast<double>(unaugmented_by_subclass[s]) * hours_per_clip});
  for (Scene s : {Scene::Indoor, Scene::Outdoor}) {
    r.rows.push_back({scene_label(s) + " scenes (unaugmented clips)",
                      r.unaugmented_per_scene[s], r.unaugmented_hours_per_scene[s]});
  }
  for (Scene s : {Scene::Indoor, Scene::Outdoor}) {
    r.rows.push_back({scene_label(s) + " scenes (with augmentation)",
                      r.total_per_scene[s], r.total_hours_per_scene[s]});
  }
  for (Scene s : {Scene::Indoor, Scene::Outdoor})
    r.rows.push_back({"Test data: " + scene_label(s), r.test_per_scene[s],
                      static_cast<double>(r.test_per_scene[s]) * hours_per_clip});
  for (Scene s : {Scene::Indoor, Scene::Outdoor})
    r.rows.push_back({"Train data: " + scene_label(s), r.train_per_scene[s],
                      static_cast<double>(r.train_per_scene[s]) * hours_per_clip});
  r.rows.push_back({"Total clips", r.total_entries, r.total_hours});
  return r;
}

std::string render_accounting(const AccountingReport& report) {
  std::ostringstream out;
  out << "| Type of Data | No. of Data Points | Hours of Audio |\n";
  out << "| --- | --- | --- |\n";
  for (const auto& row : report.rows) {
    std::ostringstream hours;
    hours << row.hours;
    out << "| " << row.label << " | " << row.count << " | " << hours.str() << " |\n";
  }
  return out.str();
}

std::string serialize_manifest(const DatasetManifest& manifest) {
  std::string out;
  for (const auto& e : manifest.entries) {
    json record = {
        {"path", e.path},
        {"scene", scene_name(e.scene())},
        {"subclass", subclass_name(e.subclass)},
        {"split", split_name(e.split)},
        {"augmented", e.augmented},
        {"parent_id", e.parent_id},
    };
    out += record.dump();
    out += '\n';
  }
  return out;
}

DatasetManifest parse_manifest(const std::string& text) {
  DatasetManifest manifest;
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
    ManifestEntry entry;
    try {
      entry.path = record.at("path").get<std::string>();
      entry.subclass = parse_subclass(record.at("subclass").get<std::string>());
      entry.split = parse_split(record.at("split").get<std::string>());
      entry.augmented = record.at("augmented").get<bool>();
      entry.parent_id = record.at("parent_id").get<std::string>();
      const std::string scene = record.at("scene").get<std::string>();
      if (scene != scene_name(entry.scene()))
        throw FormatError("manifest line " + std::to_string(line_no) + ": scene '" +
                          scene + "' inconsistent with subclass '" +
                          subclass_name(entry.subclass) + "'");
    } catch (const json::exception& e) {
      throw FormatError("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  const std::string text = serialize_manifest(manifest);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string());
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str());
}

}  // namespace asc
