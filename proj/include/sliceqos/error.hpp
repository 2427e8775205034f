#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sliceqos {

enum class Errc {
  // fabric
  DuplicateSwitchId,
  DanglingLink,
  MappingGap,
  NoDefaultQueue,
  InvalidConfig,
  // path discovery / forwarding
  NoRoute,
  StaleArp,
  RoutingLoop,
  // traffic
  UnroutedFlow,
  // telemetry
  UnknownInterface,
  // scenarios
  ParseError,
  UnknownEndpoint,
  WindowOutOfRange,
  IoError,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

  // Validation failures map to CLI exit code 1, everything else to 2.
  bool is_validation() const noexcept;

 private:
  Errc code_;
};

}  // namespace sliceqos
