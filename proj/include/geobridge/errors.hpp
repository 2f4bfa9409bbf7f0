#pragma once

#include <stdexcept>
#include <string>

namespace geobridge {

/// Base of all library errors. `tag()` is a stable machine-parsable class
/// name; `what()` carries the human message.
class Error : public std::runtime_error {
 public:
  Error(std::string tag, const std::string& msg)
      : std::runtime_error(msg), tag_(std::move(tag)) {}
  const std::string& tag() const noexcept { return tag_; }

 private:
  std::string tag_;
};

#define GEOBRIDGE_DEFINE_ERROR(Name)                          \
  class Name : public Error {                                 \
   public:                                                    \
    explicit Name(const std::string& msg) : Error(#Name, msg) {} \
  }

GEOBRIDGE_DEFINE_ERROR(CutLocusError);
GEOBRIDGE_DEFINE_ERROR(DegenerateEmbeddingError);
GEOBRIDGE_DEFINE_ERROR(RetractionError);
GEOBRIDGE_DEFINE_ERROR(ParseError);
GEOBRIDGE_DEFINE_ERROR(RangeError);
GEOBRIDGE_DEFINE_ERROR(ConfigError);
GEOBRIDGE_DEFINE_ERROR(SizeError);
GEOBRIDGE_DEFINE_ERROR(DegeneracyError);
GEOBRIDGE_DEFINE_ERROR(IoError);

#undef GEOBRIDGE_DEFINE_ERROR

}  // namespace geobridge
