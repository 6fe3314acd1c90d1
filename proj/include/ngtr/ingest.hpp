#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ngtr/errors.hpp"
#include "ngtr/markup.hpp"
#include "ngtr/table.hpp"

namespace ngtr {

/// One labeled sample in the canonical ground-truth form. image_path is
/// as recorded in the source (usually relative to the manifest file).
struct GoldSample {
  std::string id;
  std::string image_path;
  LogicalTable table;
  std::string markup;  // dataset markup when present, else regenerated
  bool missing_image = false;
};

struct IngestStats {
  size_t read = 0;
  size_t skipped = 0;
};

// ---- canonical JSONL: {id, image_path, cells:[...], markup?} ----

inline std::vector<GoldSample> read_canonical_jsonl(const std::filesystem::path& path,
                                                    IngestStats* stats = nullptr) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read corpus file: " + path.string());
  IngestStats local;
  IngestStats& st = stats ? *stats : local;
  std::vector<GoldSample> samples;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.contains("id") || !j.contains("cells")) {
      ++st.skipped;
      continue;
    }
    GoldSample s;
    s.id = j["id"].get<std::string>();
    s.image_path = j.value("image_path", "");
    for (const auto& c : j["cells"]) {
      s.table.cells.push_back(LogicalCell{c.at("start_row").get<int>(),
                                          c.at("end_row").get<int>(),
                                          c.at("start_col").get<int>(),
                                          c.at("end_col").get<int>(),
                                          c.value("content", "")});
    }
    s.table.id = s.id;
    sort_cells(s.table);
    s.markup = j.value("markup", "");
    if (s.markup.empty()) s.markup = logical_to_markup(s.table);
    samples.push_back(std::move(s));
    ++st.read;
  }
  return samples;
}

inline void write_canonical_jsonl(const std::vector<GoldSample>& samples,
                                  const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write corpus file: " + path.string());
  for (const auto& s : samples) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : s.table.cells)
      cells.push_back({{"start_row", c.start_row},
                       {"end_row", c.end_row},
                       {"start_col", c.start_col},
                       {"end_col", c.end_col},
                       {"content", c.content}});
    nlohmann::json j = {{"id", s.id},
                        {"image_path", s.image_path},
                        {"cells", cells},
                        {"markup", s.markup}};
    out << j.dump() << "\n";
  }
}

// ---- PubTabNet-style JSONL: structure token stream + per-cell tokens ----

namespace detail {

inline bool looks_like_tag(const std::string& token) {
  return token.size() >= 2 && token.front() == '<' && token.back() == '>';
}

// joins a cell's tokens into content text, dropping inline tag tokens
inline std::string join_cell_tokens(const nlohmann::json& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!t.is_string()) continue;
    std::string s = t.get<std::string>();
    if (looks_like_tag(s)) continue;
    out += s;
  }
  return out;
}

}  // namespace detail

/// Rebuilds markup from the structure token stream, splicing each cell's
/// joined tokens in before its closing tag, then converts to logical form
/// through the lenient parser (thead/tbody flatten away). Malformed lines
/// are skipped and counted.
inline std::vector<GoldSample> ingest_pubtabnet(const std::filesystem::path& path,
                                                IngestStats* stats = nullptr) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read PubTabNet file: " + path.string());
  IngestStats local;
  IngestStats& st = stats ? *stats : local;
  std::vector<GoldSample> samples;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) {
      ++st.skipped;
      continue;
    }
    try {
      if (!j.contains("filename") || !j.contains("html"))
        throw FormatError("line lacks filename/html fields");
      const nlohmann::json& structure = j.at("html").at("structure").at("tokens");
      const nlohmann::json& cells = j.at("html").at("cells");
      std::string markup = "<table>";
      size_t cell_idx = 0;
      for (const auto& t : structure) {
        std::string token = t.get<std::string>();
        if (token == "</td>") {
          if (cell_idx < cells.size())
            markup += escape_markup_text(
                detail::join_cell_tokens(cells[cell_idx].value("tokens", nlohmann::json::array())));
          ++cell_idx;
        }
        markup += token;
      }
      markup += "</table>";

      GoldSample s;
      s.id = std::filesystem::path(j["filename"].get<std::string>()).stem().string();
      s.image_path = j["filename"].get<std::string>();
      s.markup = serialize_markup(parse_markup(markup, ParseMode::Lenient));
      s.table = markup_to_logical(parse_markup(s.markup), s.id);
      samples.push_back(std::move(s));
      ++st.read;
    } catch (const Error&) {
      ++st.skipped;
    } catch (const nlohmann::json::exception&) {
      ++st.skipped;
    }
  }
  return samples;
}

// ---- SciTSR-style structure dir: per-table cell list with extents ----

/// Reads <dir>/structure/*.json (or *.json directly under <dir>); cell
/// text tokens join with spaces. A label whose image is missing under
/// <dir>/images keeps its record with a missing-image flag.
inline std::vector<GoldSample> ingest_scitsr(const std::filesystem::path& dir,
                                             IngestStats* stats = nullptr) {
  IngestStats local;
  IngestStats& st = stats ? *stats : local;
  std::filesystem::path structure_dir = dir / "structure";
  if (!std::filesystem::is_directory(structure_dir)) structure_dir = dir;
  if (!std::filesystem::is_directory(structure_dir))
    throw FormatError("not a SciTSR-style directory: " + dir.string());

  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(structure_dir))
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  std::vector<GoldSample> samples;
  for (const auto& file : files) {
    try {
      std::ifstream in(file);
      nlohmann::json j = nlohmann::json::parse(in);
      GoldSample s;
      s.id = file.stem().string();
      for (const auto& c : j.at("cells")) {
        std::string content;
        if (c.contains("content") && c["content"].is_array()) {
          for (const auto& t : c["content"]) {
            if (!content.empty()) content += " ";
            content += t.get<std::string>();
          }
        }
        s.table.cells.push_back(LogicalCell{c.at("start_row").get<int>(),
                                            c.at("end_row").get<int>(),
                                            c.at("start_col").get<int>(),
                                            c.at("end_col").get<int>(), content});
      }
      s.table.id = s.id;
      sort_cells(s.table);
      s.markup = logical_to_markup(s.table);
      std::filesystem::path image = dir / "images" / (s.id + ".png");
      s.image_path = std::filesystem::relative(image, dir).generic_string();
      s.missing_image = !std::filesystem::exists(image);
      samples.push_back(std::move(s));
      ++st.read;
    } catch (const nlohmann::json::exception&) {
      ++st.skipped;
    } catch (const Error&) {
      ++st.skipped;
    }
  }
  return samples;
}

}  // namespace ngtr
