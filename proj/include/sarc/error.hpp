#pragma once

#include <stdexcept>
#include <string>

namespace sarc {

// Distinguishes failures so the CLI can map them onto distinct exit codes.
enum class ErrorKind {
    InvalidArgument,
    MissingFile,
    Schema,
    MixedMode,
    Shape,
    Numeric,
};

class Error : public std::runtime_error {
   public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

   private:
    ErrorKind kind_;
};

}  // namespace sarc
