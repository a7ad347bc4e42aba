#include "roma/errors.hpp"

namespace roma {

int exit_code(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::Config: return 2;
    case ErrorCategory::Data: return 3;
    case ErrorCategory::Numerical: return 4;
  }
  return 1;
}

}  // namespace roma
