#pragma once

#include <stdexcept>
#include <string>

namespace ngtr {

/// Base class for all toolkit errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// table model
struct OverlapError : Error { using Error::Error; };
struct IndexError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct EmptyError : Error { using Error::Error; };
struct GeometryError : Error { using Error::Error; };

// metrics
struct DegenerateError : Error { using Error::Error; };

// image toolkit
struct ImageError : Error { using Error::Error; };
struct SizeError : Error { using Error::Error; };
struct UnknownScenarioError : Error { using Error::Error; };

// retrieval
struct FeaturelessError : Error { using Error::Error; };
struct EmptyStoreError : Error { using Error::Error; };
struct FormatError : Error { using Error::Error; };

// gateway
struct TransportError : Error { using Error::Error; };
struct AuthError : Error { using Error::Error; };
struct RateLimitError : Error { using Error::Error; };
struct NoTableError : Error { using Error::Error; };
struct TemplateError : Error { using Error::Error; };
struct MockMissError : Error { using Error::Error; };

// pipeline
struct BudgetError : Error { using Error::Error; };

}  // namespace ngtr
