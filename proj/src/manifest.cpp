#include "msba/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace msba {

using nlohmann::json;

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw std::invalid_argument("unknown split: " + s);
}

const ImageRecord* Manifest::find(const std::string& id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &records[it->second];
}

const ImageRecord& Manifest::real_of_group(const std::string& group_id) const {
  auto it = real_by_group_.find(group_id);
  if (it == real_by_group_.end())
    throw std::runtime_error("group has no real record: " + group_id);
  return records[it->second];
}

std::vector<const ImageRecord*> Manifest::fakes_of_group(const std::string& group_id) const {
  std::vector<const ImageRecord*> out;
  auto it = fakes_by_group_.find(group_id);
  if (it == fakes_by_group_.end()) return out;
  out.reserve(it->second.size());
  for (size_t idx : it->second) out.push_back(&records[idx]);
  return out;
}

std::vector<const ImageRecord*> Manifest::split_records(Split s) const {
  std::vector<const ImageRecord*> out;
  for (const auto& r : records)
    if (r.split == s) out.push_back(&r);
  return out;
}

void Manifest::rebuild_index() {
  by_id_.clear();
  real_by_group_.clear();
  fakes_by_group_.clear();
  for (size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!by_id_.emplace(r.id, i).second)
      throw std::runtime_error("duplicate record id: " + r.id);
    if (r.label == 0) {
      if (!real_by_group_.emplace(r.group_id, i).second)
        throw std::runtime_error("group has multiple real records: " + r.group_id);
    } else {
      fakes_by_group_[r.group_id].push_back(i);
    }
  }
}

namespace {

ImageRecord parse_record(const json& j, int line_no) {
  auto fail = [line_no](const std::string& msg) -> std::runtime_error {
    return std::runtime_error("manifest line " + std::to_string(line_no) + ": " + msg);
  };
  for (const char* key : {"id", "image_path", "label", "method", "group_id", "split", "mask_path"})
    if (!j.contains(key)) throw fail(std::string("missing key '") + key + "'");

  ImageRecord r;
  r.id = j.at("id").get<std::string>();
  r.image_path = j.at("image_path").get<std::string>();
  r.label = j.at("label").get<int>();
  if (r.label != 0 && r.label != 1) throw fail("label must be 0 or 1");
  if (!j.at("method").is_null()) r.method = j.at("method").get<int>();
  r.group_id = j.at("group_id").get<std::string>();
  r.split = split_from_string(j.at("split").get<std::string>());
  if (!j.at("mask_path").is_null()) r.mask_path = j.at("mask_path").get<std::string>();

  if (r.label == 0 && (r.method.has_value() || r.mask_path.has_value()))
    throw fail("real record must have null method and mask_path: " + r.id);
  if (r.label == 1 && !r.method.has_value())
    throw fail("fake record must carry a method index: " + r.id);
  return r;
}

}  // namespace

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("manifest file not found: " + path.string());

  Manifest m;
  m.base_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");

  std::string line;
  int line_no = 0;
  std::set<int> methods_seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error("manifest line " + std::to_string(line_no) +
                               ": malformed json (" + e.what() + ")");
    }
    m.records.push_back(parse_record(j, line_no));
    if (m.records.back().method.has_value()) methods_seen.insert(*m.records.back().method);
  }

  m.rebuild_index();

  // Dangling groups: every fake must resolve to a real record in its split.
  for (const auto& r : m.records) {
    if (r.label != 1) continue;
    const ImageRecord* real = nullptr;
    for (const auto& cand : m.records)
      if (cand.label == 0 && cand.group_id == r.group_id && cand.split == r.split) {
        real = &cand;
        break;
      }
    if (!real)
      throw std::runtime_error("dangling group_id '" + r.group_id + "' for fake record " + r.id);
  }

  m.num_methods = methods_seen.empty() ? 1 : *methods_seen.rbegin() + 1;
  for (int mi : methods_seen)
    if (mi < 0) throw std::runtime_error("negative method index in manifest");
  return m;
}

void save_manifest(const Manifest& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write manifest: " + path.string());
  for (const auto& r : m.records) {
    json j;
    j["id"] = r.id;
    j["image_path"] = r.image_path;
    j["label"] = r.label;
    if (r.method.has_value())
      j["method"] = *r.method;
    else
      j["method"] = nullptr;
    j["group_id"] = r.group_id;
    j["split"] = to_string(r.split);
    if (r.mask_path.has_value())
      j["mask_path"] = *r.mask_path;
    else
      j["mask_path"] = nullptr;
    out << j.dump() << "\n";
  }
}

}  // namespace msba
