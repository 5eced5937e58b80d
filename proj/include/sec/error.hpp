#pragma once

#include <stdexcept>
#include <string>

namespace sec {

// Every failure raised by the library derives from Error so callers can
// catch the whole family at a stage boundary.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SEC_DEFINE_ERROR(Name)                   \
  class Name : public Error {                    \
   public:                                       \
    explicit Name(const std::string& what)       \
        : Error(std::string(#Name ": ") + what) {} \
  }

// audio-io
SEC_DEFINE_ERROR(MalformedContainer);
SEC_DEFINE_ERROR(UnsupportedEncoding);
SEC_DEFINE_ERROR(IoFailure);

// chunker / estimator
SEC_DEFINE_ERROR(InvalidWindow);
SEC_DEFINE_ERROR(EmptyChunk);
SEC_DEFINE_ERROR(ParseFailure);
SEC_DEFINE_ERROR(BindFailure);

// mapping-engine
SEC_DEFINE_ERROR(ConfigInvalid);

// wire-sinks
SEC_DEFINE_ERROR(TooManyChannels);
SEC_DEFINE_ERROR(ValueOutOfRange);
SEC_DEFINE_ERROR(ConnectFailure);

// cli
SEC_DEFINE_ERROR(UsageError);

#undef SEC_DEFINE_ERROR

}  // namespace sec
