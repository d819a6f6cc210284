#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "ganaug/csv.hpp"
#include "ganaug/error.hpp"
#include "ganaug/image.hpp"
#include "ganaug/rng.hpp"

namespace ganaug {

enum class Split { Train, Val, Test };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

struct ImageRecord {
  Image image;
  int label = 0;
  std::string source_path;
};

// Class order defines the label integers and is fixed at creation time.
struct DatasetManifest {
  struct Entry {
    std::string path;
    int label = 0;
    Split split = Split::Train;
  };

  std::vector<std::string> class_names;
  std::vector<Entry> entries;
  std::uint64_t seed = 0;

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(class_names.size(), 0);
    for (const auto& e : entries) counts[static_cast<std::size_t>(e.label)]++;
    return counts;
  }

  std::string to_csv() const {
    CsvTable table;
    table.header = {"path", "class", "label", "split"};
    for (const auto& e : entries)
      table.rows.push_back({e.path, class_names[static_cast<std::size_t>(e.label)],
                            csv_int(e.label), split_name(e.split)});
    return table.to_string();
  }
};

struct Dataset {
  std::vector<ImageRecord> records;
  DatasetManifest manifest;
  std::size_t skipped = 0;  // undecodable files that were passed over
};

// Sorted subdirectory names of a dataset root.
inline std::vector<std::string> discover_classes(const std::string& root) {
  namespace fs = std::filesystem;
  require(fs::is_directory(root), ErrorKind::MissingClassDir,
          "dataset root " + root + " is not a directory");
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) names.push_back(entry.path().filename().string());
  std::sort(names.begin(), names.end());
  require(!names.empty(), ErrorKind::MissingClassDir, "no class directories under " + root);
  return names;
}

// Loads <root>/<class>/*.{ppm,png} with lexicographic file order per class.
// Undecodable files are skipped and counted; a class where everything was
// skipped is an error.
inline Dataset load_dataset(const std::string& root, const std::vector<std::string>& classes) {
  namespace fs = std::filesystem;
  require(!classes.empty(), ErrorKind::MissingClassDir, "empty class list");
  Dataset ds;
  ds.manifest.class_names = classes;
  for (std::size_t label = 0; label < classes.size(); ++label) {
    fs::path dir = fs::path(root) / classes[label];
    require(fs::is_directory(dir), ErrorKind::MissingClassDir,
            "class directory " + dir.string() + " does not exist");
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_regular_file()) continue;
      std::string ext = entry.path().extension().string();
      for (auto& c : ext) c = static_cast<char>(std::tolower(c));
      if (ext == ".ppm" || ext == ".png") files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    require(!files.empty(), ErrorKind::NoImages, "no images in " + dir.string());
    std::size_t decoded = 0;
    for (const auto& file : files) {
      try {
        ImageRecord rec;
        rec.image = decode_image(file);
        rec.label = static_cast<int>(label);
        rec.source_path = file;
        ds.records.push_back(std::move(rec));
        ds.manifest.entries.push_back({file, static_cast<int>(label), Split::Train});
        ++decoded;
      } catch (const Error&) {
        ++ds.skipped;
      }
    }
    require(decoded > 0, ErrorKind::NoImages,
            "no decodable images in " + dir.string() + " (" + std::to_string(files.size()) +
                " skipped)");
  }
  return ds;
}

// Stratified train/val assignment with a seeded shuffle. Per class the val
// count is round(fraction*n) clamped to [1, n-1], so both splits stay
// populated whenever a class has at least two samples.
inline void apply_split(DatasetManifest& manifest, double val_fraction, std::uint64_t seed) {
  require(val_fraction > 0.0 && val_fraction < 1.0, ErrorKind::InvalidConfig,
          "val fraction must lie in (0,1)");
  manifest.seed = seed;
  Rng rng(seed);
  for (std::size_t label = 0; label < manifest.class_names.size(); ++label) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i)
      if (manifest.entries[i].label == static_cast<int>(label)) idx.push_back(i);
    require(!idx.empty(), ErrorKind::EmptyClass,
            "class " + manifest.class_names[label] + " has no samples");
    require(idx.size() >= 2, ErrorKind::EmptyClass,
            "class " + manifest.class_names[label] + " needs at least 2 samples to split");
    rng.shuffle(idx);
    std::size_t val_count = static_cast<std::size_t>(
        std::llround(val_fraction * static_cast<double>(idx.size())));
    if (val_count < 1) val_count = 1;
    if (val_count > idx.size() - 1) val_count = idx.size() - 1;
    for (std::size_t i = 0; i < idx.size(); ++i)
      manifest.entries[idx[i]].split = i < val_count ? Split::Val : Split::Train;
  }
}

inline std::vector<std::size_t> split_indices(const DatasetManifest& manifest, Split split) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i)
    if (manifest.entries[i].split == split) idx.push_back(i);
  return idx;
}

}  // namespace ganaug
