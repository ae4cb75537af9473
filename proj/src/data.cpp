// Copyright 2026 The HCCM Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "hccm/data.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hccm/errors.hpp"
#include "hccm/io.hpp"

namespace hccm {

using nlohmann::json;

void ImageCatalog::add(CatalogEntry entry) {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), entry.id,
                             [](const CatalogEntry& e, uint64_t id) { return e.id < id; });
  if (it != entries_.end() && it->id == entry.id) {
    throw ConfigError("catalog: duplicate pic id " + std::to_string(entry.id));
  }
  entries_.insert(it, std::move(entry));
}

bool ImageCatalog::contains(uint64_t pic) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), pic,
                             [](const CatalogEntry& e, uint64_t id) { return e.id < id; });
  return it != entries_.end() && it->id == pic;
}

const CatalogEntry& ImageCatalog::entry(uint64_t pic) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), pic,
                             [](const CatalogEntry& e, uint64_t id) { return e.id < id; });
  if (it == entries_.end() || it->id != pic) {
    throw CacheMissError("pic id " + std::to_string(pic) + " not in catalog");
  }
  return *it;
}

void ImageCatalog::save(const std::string& path) const {
  BinaryWriter w;
  w.magic("IMGC");
  w.u32(1);
  w.u64(entries_.size());
  for (const auto& e : entries_) {
    w.u64(e.id);
    w.u16(e.category);
    w.u32(static_cast<uint32_t>(e.image.w));
    w.u32(static_cast<uint32_t>(e.image.h));
    w.u32(static_cast<uint32_t>(e.image.c));
    w.f32_array(e.image.pix.data(), e.image.pix.size());
  }
  atomic_write_file(path, w.bytes());
}

ImageCatalog ImageCatalog::load(const std::string& path) {
  auto bytes = read_file_bytes(path);
  BinaryReader r(bytes);
  r.expect_magic("IMGC", "catalog " + path);
  uint32_t version = r.u32();
  if (version != 1) throw IoError("catalog " + path + ": unsupported version");
  uint64_t count = r.u64();
  ImageCatalog catalog;
  catalog.entries_.reserve(count);
  for (uint64_t i = 0; i < count; ++i) {
    CatalogEntry e;
    e.id = r.u64();
    e.category = r.u16();
    e.image.w = static_cast<int>(r.u32());
    e.image.h = static_cast<int>(r.u32());
    e.image.c = static_cast<int>(r.u32());
    e.image.pix.resize(static_cast<size_t>(e.image.size()));
    r.f32_array(e.image.pix.data(), e.image.pix.size());
    if (!catalog.entries_.empty() && catalog.entries_.back().id >= e.id) {
      throw IoError("catalog " + path + ": ids not strictly increasing");
    }
    catalog.entries_.push_back(std::move(e));
  }
  if (!r.at_end()) throw IoError("catalog " + path + ": trailing bytes");
  return catalog;
}

std::string sample_to_json_line(const Sample& s, bool with_label) {
  json j;
  j["user"] = s.user_id;
  j["ctx"] = s.context_ids;
  j["item"] = s.item_id;
  j["pic"] = s.cand_pic;
  j["cat"] = s.cand_cat;
  json behaviors = json::array();
  for (const auto& b : s.behaviors) behaviors.push_back({b.pic, b.cat});
  j["behaviors"] = behaviors;
  if (with_label) j["label"] = s.label;
  return j.dump();
}

Sample sample_from_json_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad sample json: ") + e.what());
  }
  try {
    Sample s;
    s.user_id = j.at("user").get<uint64_t>();
    s.context_ids = j.at("ctx").get<std::vector<uint64_t>>();
    s.item_id = j.at("item").get<uint64_t>();
    s.cand_pic = j.at("pic").get<uint64_t>();
    s.cand_cat = j.at("cat").get<uint16_t>();
    for (const auto& b : j.at("behaviors")) {
      if (!b.is_array() || b.size() != 2) throw ConfigError("behavior entries must be [pic, cat]");
      s.behaviors.push_back({b[0].get<uint64_t>(), b[1].get<uint16_t>()});
    }
    if (j.contains("label")) {
      int label = j.at("label").get<int>();
      if (label != 0 && label != 1) throw ConfigError("label must be 0 or 1");
      s.label = label;
    }
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad sample json: ") + e.what());
  }
}

void write_jsonl(const std::string& path, const Dataset& data) {
  std::ostringstream out;
  for (const auto& s : data) out << sample_to_json_line(s) << "\n";
  atomic_write_text(path, out.str());
}

Dataset read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  Dataset data;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    data.push_back(sample_from_json_line(line));
  }
  return data;
}

}  // namespace hccm
