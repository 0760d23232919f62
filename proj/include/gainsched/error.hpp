#pragma once

#include <stdexcept>
#include <string>

namespace gainsched {

// Every failure the library reports carries a short machine-readable kind
// ("cycle", "disconnected", "schema", ...) next to the human message. The CLI
// serialises both into its error JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

}  // namespace gainsched
