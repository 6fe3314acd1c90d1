#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ngtr/errors.hpp"
#include "ngtr/features.hpp"
#include "ngtr/markup.hpp"

namespace ngtr {

/// One labeled training sample available for neighbor retrieval: features
/// are precomputed at ingest so retrieval never re-reads the image.
struct NeighborRecord {
  std::string id;
  std::string image_path;  // relative to the store directory
  FeatureSet features;
  std::string gold_markup;
  std::string traits;  // free-text notes injected into planning prompts
};

struct NeighborStore {
  std::vector<NeighborRecord> records;
  std::string build_params;

  bool empty() const { return records.empty(); }
  size_t size() const { return records.size(); }
};

/// Retrieval hit: record index plus similarity score.
struct RetrievalHit {
  const NeighborRecord* record = nullptr;
  double score = 0.0;
};

/// Top-k most similar records, descending score, ties broken by ascending
/// id. k defaults to 1.
inline std::vector<RetrievalHit> retrieve(const TableImage& test, const NeighborStore& store,
                                          size_t k = 1, const FeatureParams& params = {}) {
  if (store.empty()) throw EmptyStoreError("neighbor store has no records");
  FeatureSet query = extract_features(test, params);
  std::vector<RetrievalHit> hits;
  hits.reserve(store.size());
  for (const auto& rec : store.records)
    hits.push_back(RetrievalHit{&rec, similarity(query, rec.features, params)});
  std::stable_sort(hits.begin(), hits.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.record->id < b.record->id;
  });
  if (hits.size() > k) hits.resize(k);
  return hits;
}

namespace detail {

constexpr char kStoreMagic[8] = {'N', 'G', 'T', 'R', 'F', 'T', '0', '1'};

inline void put_f32(std::string& buf, float v) {
  char b[4];
  std::memcpy(b, &v, 4);
  buf.append(b, 4);
}

inline float get_f32(const char* p) {
  float v;
  std::memcpy(&v, p, 4);
  return v;
}

}  // namespace detail

/// Store layout on disk: <dir>/store_manifest.jsonl (one record per line,
/// first line is a header) + <dir>/features.bin (magic + per-record
/// keypoint/descriptor blobs addressed by manifest offsets).
inline void save_store(const NeighborStore& store, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::string blob(detail::kStoreMagic, 8);
  std::ofstream manifest(dir / "store_manifest.jsonl");
  if (!manifest) throw FormatError("cannot write store manifest in " + dir.string());
  nlohmann::json header = {{"format", "ngtr-store"},
                           {"version", 1},
                           {"records", store.size()},
                           {"build_params", store.build_params}};
  manifest << header.dump() << "\n";
  for (const auto& rec : store.records) {
    size_t offset = blob.size();
    for (const auto& kp : rec.features.keypoints) {
      detail::put_f32(blob, kp.x);
      detail::put_f32(blob, kp.y);
      detail::put_f32(blob, kp.angle_rad);
      detail::put_f32(blob, kp.response);
    }
    for (const auto& d : rec.features.descriptors)
      blob.append(reinterpret_cast<const char*>(d.data()), d.size());
    nlohmann::json line = {{"id", rec.id},
                           {"image_path", rec.image_path},
                           {"gold_markup", rec.gold_markup},
                           {"traits", rec.traits},
                           {"n_features", rec.features.size()},
                           {"offset", offset}};
    manifest << line.dump() << "\n";
  }
  std::ofstream bin(dir / "features.bin", std::ios::binary);
  if (!bin) throw FormatError("cannot write features.bin in " + dir.string());
  bin.write(blob.data(), static_cast<std::streamsize>(blob.size()));
}

inline NeighborStore load_store(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "store_manifest.jsonl");
  if (!manifest) throw FormatError("missing store manifest in " + dir.string());
  std::ifstream bin(dir / "features.bin", std::ios::binary);
  if (!bin) throw FormatError("missing features.bin in " + dir.string());
  std::string blob((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
  if (blob.size() < 8 || std::memcmp(blob.data(), detail::kStoreMagic, 8) != 0)
    throw FormatError("features.bin has wrong magic header");

  NeighborStore store;
  std::string line;
  bool first = true;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    if (first) {
      first = false;
      if (j.value("format", "") != "ngtr-store" || j.value("version", 0) != 1)
        throw FormatError("unsupported store format/version");
      store.build_params = j.value("build_params", "");
      continue;
    }
    NeighborRecord rec;
    rec.id = j.at("id").get<std::string>();
    rec.image_path = j.at("image_path").get<std::string>();
    rec.gold_markup = j.at("gold_markup").get<std::string>();
    rec.traits = j.value("traits", "");
    size_t n = j.at("n_features").get<size_t>();
    size_t offset = j.at("offset").get<size_t>();
    size_t need = n * (16 + 32);
    if (offset + need > blob.size()) throw FormatError("features.bin truncated for id " + rec.id);
    const char* p = blob.data() + offset;
    rec.features.keypoints.resize(n);
    for (size_t i = 0; i < n; ++i) {
      rec.features.keypoints[i] = Keypoint{detail::get_f32(p), detail::get_f32(p + 4),
                                           detail::get_f32(p + 8), detail::get_f32(p + 12)};
      p += 16;
    }
    rec.features.descriptors.resize(n);
    for (size_t i = 0; i < n; ++i) {
      std::memcpy(rec.features.descriptors[i].data(), p, 32);
      p += 32;
    }
    for (const auto& r : store.records)
      if (r.id == rec.id) throw FormatError("duplicate record id in store: " + rec.id);
    store.records.push_back(std::move(rec));
  }
  return store;
}

struct StoreBuildStats {
  size_t added = 0;
  size_t skipped_featureless = 0;
  size_t skipped_unreadable = 0;
  size_t skipped_bad_markup = 0;
  size_t skipped_duplicate_id = 0;
};

/// Builds a store from (id, image path, gold markup, traits) tuples:
/// extracts features, validates the gold markup parses, skips and counts
/// anything unusable.
struct StoreSource {
  std::string id;
  std::filesystem::path image_path;  // absolute or cwd-relative
  std::string gold_markup;
  std::string traits;
};

inline NeighborStore build_store(const std::vector<StoreSource>& sources,
                                 const std::filesystem::path& store_dir,
                                 StoreBuildStats* stats = nullptr,
                                 const FeatureParams& params = {}) {
  StoreBuildStats local;
  StoreBuildStats& st = stats ? *stats : local;
  NeighborStore store;
  store.build_params = "orb(max_features=" + std::to_string(params.max_features) + ")";
  std::set<std::string> seen_ids;
  for (const auto& src : sources) {
    if (!seen_ids.insert(src.id).second) {
      ++st.skipped_duplicate_id;
      continue;
    }
    try {
      parse_markup(src.gold_markup, ParseMode::Lenient);
    } catch (const Error&) {
      ++st.skipped_bad_markup;
      continue;
    }
    TableImage img;
    try {
      img = load_image(src.image_path.string(), src.id);
    } catch (const Error&) {
      ++st.skipped_unreadable;
      continue;
    }
    NeighborRecord rec;
    rec.id = src.id;
    rec.gold_markup = src.gold_markup;
    rec.traits = src.traits;
    std::error_code ec;
    auto rel = std::filesystem::relative(std::filesystem::absolute(src.image_path),
                                         std::filesystem::absolute(store_dir), ec);
    rec.image_path = ec ? src.image_path.string() : rel.generic_string();
    try {
      rec.features = extract_features(img, params);
    } catch (const FeaturelessError&) {
      ++st.skipped_featureless;
      continue;
    }
    store.records.push_back(std::move(rec));
    ++st.added;
  }
  return store;
}

/// Resolves a record's image path against its store directory.
inline std::filesystem::path resolve_record_image(const NeighborRecord& rec,
                                                  const std::filesystem::path& store_dir) {
  std::filesystem::path p(rec.image_path);
  return p.is_absolute() ? p : store_dir / p;
}

}  // namespace ngtr
