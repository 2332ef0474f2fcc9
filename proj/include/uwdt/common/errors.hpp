#pragma once

#include <stdexcept>

namespace uwdt {

// Operation attempted on an object whose state does not allow it, e.g.
// stepping a world that has already terminated.
class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace uwdt
