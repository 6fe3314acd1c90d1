#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <string>
#include <vector>

#include "ngtr/digest.hpp"
#include "ngtr/errors.hpp"
#include "ngtr/gateway.hpp"
#include "ngtr/image.hpp"

namespace ngtr {

enum class PromptId {
  RecognizeSimple,
  RecognizeCoT,
  Vtsd,
  Mcd,
  Ccr,
  Icr,
  Irdr,
  Icdr,
  PlanGeneration,
  Reflection,
};

inline const std::vector<PromptId>& all_prompts() {
  static const std::vector<PromptId> ids = {
      PromptId::RecognizeSimple, PromptId::RecognizeCoT, PromptId::Vtsd,  PromptId::Mcd,
      PromptId::Ccr,             PromptId::Icr,          PromptId::Irdr,  PromptId::Icdr,
      PromptId::PlanGeneration,  PromptId::Reflection};
  return ids;
}

inline std::string to_string(PromptId id) {
  switch (id) {
    case PromptId::RecognizeSimple: return "RecognizeSimple";
    case PromptId::RecognizeCoT: return "RecognizeCoT";
    case PromptId::Vtsd: return "VTSD";
    case PromptId::Mcd: return "MCD";
    case PromptId::Ccr: return "CCR";
    case PromptId::Icr: return "ICR";
    case PromptId::Irdr: return "IRDR";
    case PromptId::Icdr: return "ICDR";
    case PromptId::PlanGeneration: return "PlanGeneration";
    case PromptId::Reflection: return "Reflection";
  }
  return "?";
}

namespace detail {

// Template bodies. Placeholders use {name}; bodies contain no other
// braces so unbound placeholders are detectable after rendering.
inline const char* builtin_prompt(PromptId id) {
  switch (id) {
    case PromptId::RecognizeSimple:
      return
          "You are given an image of a table.\n"
          "Recognize the table structure and the cell contents, then output the table as an\n"
          "HTML fragment using only table, tr and td tags. Every td must carry explicit\n"
          "rowspan and colspan attributes. Escape special characters inside cell text.\n"
          "Output only the HTML fragment, nothing else.\n";
    case PromptId::RecognizeCoT:
      return
          "You are given an image of a table. Work step by step:\n"
          "1. Count the rows and columns of the table grid.\n"
          "2. Identify merged cells and their row/column extents.\n"
          "3. Read the text content of every cell.\n"
          "4. Assemble the result as an HTML fragment using only table, tr and td tags,\n"
          "   with explicit rowspan and colspan attributes on every td.\n"
          "After your reasoning, output the final HTML fragment on its own line.\n";
    case PromptId::Vtsd:
      return
          "You are given an image of a table.\n"
          "Determine the total number of rows and columns of the table grid. Merged cells\n"
          "count once for every grid row/column they span.\n"
          "Reply with a final line of exactly this form:\n"
          "ANSWER: rows=R, cols=C\n";
    case PromptId::Mcd:
      return
          "You are given an image of a table.\n"
          "List the contents of all merged cells, i.e. cells spanning more than one row or\n"
          "more than one column. If there are none, answer with an empty list.\n"
          "Reply with a final line of exactly this form (a JSON array of strings):\n"
          "ANSWER: [\"content a\", \"content b\"]\n";
    case PromptId::Ccr:
      return
          "You are given an image of a table. Rows and columns are 0-indexed from the\n"
          "top-left of the table grid.\n"
          "Find the cell whose content is exactly: {cell_content}\n"
          "Reply with a final line of exactly this form, giving the cell's top-left grid\n"
          "position:\n"
          "ANSWER: row=R, col=C\n";
    case PromptId::Icr:
      return
          "You are given an image of a table. Rows and columns are 0-indexed from the\n"
          "top-left of the table grid.\n"
          "Read the content of the cell covering grid position {cell_location}.\n"
          "Reply with a final line of exactly this form:\n"
          "ANSWER: content\n";
    case PromptId::Irdr:
      return
          "You are given an image of a table. Rows are 0-indexed from the top.\n"
          "List the contents of the cells in row {row_index}, left to right. Include a\n"
          "cell once even if it spans multiple columns.\n"
          "Reply with a final line of exactly this form (a JSON array of strings):\n"
          "ANSWER: [\"content a\", \"content b\"]\n";
    case PromptId::Icdr:
      return
          "You are given an image of a table. Columns are 0-indexed from the left.\n"
          "List the contents of the cells in column {col_index}, top to bottom. Include a\n"
          "cell once even if it spans multiple rows.\n"
          "Reply with a final line of exactly this form (a JSON array of strings):\n"
          "ANSWER: [\"content a\", \"content b\"]\n";
    case PromptId::PlanGeneration:
      return
          "You are preparing a low-quality table image for recognition. The attached image\n"
          "is a labeled sample visually similar to the target image; plans that improve it\n"
          "are expected to transfer.\n"
          "Neighbor notes: {neighbor_traits}\n"
          "Available preprocessing tools:\n"
          "{tool_descriptions}\n"
          "Propose {N} alternative tool invocation plans. Each plan is an ordered sequence\n"
          "of at most {L} tool identifiers from the list above; do not repeat a tool twice\n"
          "in a row. Prefer diverse plans.\n"
          "Reply with a single JSON array of plans, each plan a JSON array of tool\n"
          "identifier strings, for example:\n"
          "[[\"Upscale\", \"Binarize\"], [\"NoiseReduce\"]]\n";
    case PromptId::Reflection:
      return
          "Two versions of the same table image are attached: IMAGE_1 is before a\n"
          "preprocessing operation and IMAGE_2 is after it.\n"
          "Decide which version a reader could recognize the table from more reliably,\n"
          "considering legibility of text and visibility of the table structure.\n"
          "Reply with exactly one token: IMAGE_1 or IMAGE_2\n";
  }
  return "";
}

}  // namespace detail

/// Registry of prompt templates. Defaults are embedded; load_dir overlays
/// bodies from <dir>/<TemplateId>.txt so researchers can swap wording
/// without rebuilding.
class PromptRegistry {
 public:
  static PromptRegistry builtin() {
    PromptRegistry reg;
    for (PromptId id : all_prompts()) reg.bodies_[id] = detail::builtin_prompt(id);
    return reg;
  }

  static PromptRegistry load_dir(const std::filesystem::path& dir) {
    PromptRegistry reg = builtin();
    for (PromptId id : all_prompts()) {
      std::filesystem::path p = dir / (to_string(id) + ".txt");
      if (!std::filesystem::exists(p)) continue;
      std::ifstream in(p);
      reg.bodies_[id] =
          std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    }
    return reg;
  }

  const std::string& body(PromptId id) const { return bodies_.at(id); }

  /// Substitutes every {placeholder}; throws TemplateError on an unbound
  /// placeholder or leftover residue.
  std::string render(PromptId id, const std::map<std::string, std::string>& bindings) const {
    std::string out = bodies_.at(id);
    for (const auto& [key, value] : bindings) {
      const std::string token = "{" + key + "}";
      size_t pos = 0;
      while ((pos = out.find(token, pos)) != std::string::npos) {
        out.replace(pos, token.size(), value);
        pos += value.size();
      }
    }
    static const std::regex residue(R"(\{[A-Za-z_][A-Za-z0-9_]*\})");
    std::smatch m;
    if (std::regex_search(out, m, residue))
      throw TemplateError("unbound placeholder " + m.str(0) + " in template " + to_string(id));
    return out;
  }

  /// Builds a complete gateway request: rendered text, image payloads,
  /// sampling, and the stable fingerprint over (template id, bindings,
  /// image digests) used for mock replay.
  VisionRequest build_request(PromptId id, const std::map<std::string, std::string>& bindings,
                              const std::vector<const TableImage*>& images,
                              SamplingParams sampling) const {
    VisionRequest req;
    req.template_id = to_string(id);
    req.user_text = render(id, bindings);
    req.sampling = sampling;
    for (const TableImage* img : images) req.images.push_back(make_payload(*img));
    req.fingerprint = fingerprint(id, bindings, req.images);
    return req;
  }

  static std::string fingerprint(PromptId id, const std::map<std::string, std::string>& bindings,
                                 const std::vector<ImagePayload>& images) {
    uint64_t h = fnv1a64(to_string(id));
    for (const auto& [key, value] : bindings) {  // std::map iterates sorted
      h = fnv1a64(key, h);
      h = fnv1a64("=", h);
      h = fnv1a64(value, h);
      h = fnv1a64("\x1e", h);
    }
    for (const auto& img : images) {
      h = fnv1a64(img.digest, h);
      h = fnv1a64("\x1f", h);
    }
    return hex64(h);
  }

  /// Writes every template body to <dir>/<TemplateId>.txt.
  void dump_dir(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    for (const auto& [id, body] : bodies_) {
      std::ofstream out(dir / (to_string(id) + ".txt"));
      out << body;
    }
  }

 private:
  std::map<PromptId, std::string> bodies_;
};

}  // namespace ngtr
