#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace msba {

enum class Split { train, val, test };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct ImageRecord {
  std::string id;
  std::string image_path;             // relative to the manifest directory
  int label = 0;                      // 0 = real, 1 = fake
  std::optional<int> method;          // null for real records
  std::string group_id;
  Split split = Split::train;
  std::optional<std::string> mask_path;
};

struct Manifest {
  std::vector<ImageRecord> records;
  int num_methods = 1;
  int height = 0;
  int width = 0;
  std::filesystem::path base_dir;     // directory paths are resolved against

  std::filesystem::path resolve(const std::string& rel) const { return base_dir / rel; }

  const ImageRecord* find(const std::string& id) const;
  // The unique real record of a group (throws if absent).
  const ImageRecord& real_of_group(const std::string& group_id) const;
  std::vector<const ImageRecord*> fakes_of_group(const std::string& group_id) const;
  std::vector<const ImageRecord*> split_records(Split s) const;

  void rebuild_index();

 private:
  std::unordered_map<std::string, size_t> by_id_;
  std::unordered_map<std::string, size_t> real_by_group_;
  std::unordered_map<std::string, std::vector<size_t>> fakes_by_group_;
};

// Parses a JSONL manifest file and validates the record invariants.
// Error messages carry the offending line number.
Manifest load_manifest(const std::filesystem::path& path);

// Serializes in canonical key order; load(save(m)) is byte-identical for
// manifests produced by this writer.
void save_manifest(const Manifest& m, const std::filesystem::path& path);

}  // namespace msba
