#pragma once

namespace ngtr {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kStoreFormat = "ngtr-store v1";
inline constexpr const char* kMockScriptFormat = "mock-script v1 (jsonl fingerprint/response_text)";

}  // namespace ngtr
