#pragma once

#include <stdexcept>
#include <string>

namespace roma {

// Maps onto CLI exit codes 2, 3 and 4.
enum class ErrorCategory { Config, Data, Numerical };

class Error : public std::exception {
 public:
  Error(std::string message, ErrorCategory category)
      : message_(std::move(message)), category_(category) {}

  const char* what() const noexcept override { return message_.c_str(); }
  ErrorCategory category() const noexcept { return category_; }
  virtual const char* kind() const noexcept = 0;

  void add_context(const std::string& context) { message_ = context + ": " + message_; }

 private:
  std::string message_;
  ErrorCategory category_;
};

#define ROMA_DEFINE_ERROR(Name, Category)                                        \
  class Name : public Error {                                                    \
   public:                                                                       \
    explicit Name(std::string message) : Error(std::move(message), Category) {} \
    const char* kind() const noexcept override { return #Name; }                 \
  };

ROMA_DEFINE_ERROR(DimensionError, ErrorCategory::Data)
ROMA_DEFINE_ERROR(EmptyInputError, ErrorCategory::Data)
ROMA_DEFINE_ERROR(GridError, ErrorCategory::Data)
ROMA_DEFINE_ERROR(TypeMismatchError, ErrorCategory::Data)
ROMA_DEFINE_ERROR(DegenerateDataError, ErrorCategory::Data)
ROMA_DEFINE_ERROR(InvalidObjectError, ErrorCategory::Data)
ROMA_DEFINE_ERROR(DataError, ErrorCategory::Data)
ROMA_DEFINE_ERROR(NumericalError, ErrorCategory::Numerical)
ROMA_DEFINE_ERROR(SymmetryError, ErrorCategory::Numerical)
ROMA_DEFINE_ERROR(RegularizationTooSmall, ErrorCategory::Numerical)
ROMA_DEFINE_ERROR(SaturatedModelError, ErrorCategory::Numerical)
ROMA_DEFINE_ERROR(TuningFailedError, ErrorCategory::Numerical)
ROMA_DEFINE_ERROR(DegenerateSpectrumError, ErrorCategory::Numerical)
ROMA_DEFINE_ERROR(DegenerateContrastError, ErrorCategory::Numerical)
ROMA_DEFINE_ERROR(ConfigError, ErrorCategory::Config)

#undef ROMA_DEFINE_ERROR

int exit_code(ErrorCategory category);

}  // namespace roma
