#pragma once

#include <stdexcept>
#include <string>

namespace trackforge {

enum class ErrorKind {
  InvalidBox,
  Dimension,
  DegenerateEmbedding,
  PrecisionOverflow,
  Config,
  Parse,
  Consistency,
  Layout,
  InvalidMeasurement,
  Numeric,
  Ordering,
  Measurement,
  Input,
  UndefinedMetric,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidBox: return "invalid box";
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::DegenerateEmbedding: return "degenerate embedding";
    case ErrorKind::PrecisionOverflow: return "precision overflow";
    case ErrorKind::Config: return "config";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Consistency: return "consistency";
    case ErrorKind::Layout: return "layout";
    case ErrorKind::InvalidMeasurement: return "invalid measurement";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Ordering: return "ordering";
    case ErrorKind::Measurement: return "measurement";
    case ErrorKind::Input: return "input";
    case ErrorKind::UndefinedMetric: return "undefined metric";
  }
  return "unknown";
}

/// Base of every error the library throws. `kind()` identifies the contract
/// that was violated; the concrete subclasses exist so callers can catch
/// one family without inspecting the kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define TRACKFORGE_DEFINE_ERROR(Name, Kind)                                  \
  class Name : public Error {                                               \
   public:                                                                  \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
  }

TRACKFORGE_DEFINE_ERROR(InvalidBoxError, InvalidBox);
TRACKFORGE_DEFINE_ERROR(DimensionError, Dimension);
TRACKFORGE_DEFINE_ERROR(DegenerateEmbeddingError, DegenerateEmbedding);
TRACKFORGE_DEFINE_ERROR(PrecisionOverflowError, PrecisionOverflow);
TRACKFORGE_DEFINE_ERROR(ConfigError, Config);
TRACKFORGE_DEFINE_ERROR(ParseError, Parse);
TRACKFORGE_DEFINE_ERROR(ConsistencyError, Consistency);
TRACKFORGE_DEFINE_ERROR(LayoutError, Layout);
TRACKFORGE_DEFINE_ERROR(InvalidMeasurementError, InvalidMeasurement);
TRACKFORGE_DEFINE_ERROR(NumericError, Numeric);
TRACKFORGE_DEFINE_ERROR(OrderingError, Ordering);
TRACKFORGE_DEFINE_ERROR(MeasurementError, Measurement);
TRACKFORGE_DEFINE_ERROR(InputError, Input);
TRACKFORGE_DEFINE_ERROR(UndefinedMetricError, UndefinedMetric);

#undef TRACKFORGE_DEFINE_ERROR

}  // namespace trackforge
