#include "sliceqos/error.hpp"

namespace sliceqos {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::DuplicateSwitchId: return "DuplicateSwitchId";
    case Errc::DanglingLink: return "DanglingLink";
    case Errc::MappingGap: return "MappingGap";
    case Errc::NoDefaultQueue: return "NoDefaultQueue";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::NoRoute: return "NoRoute";
    case Errc::StaleArp: return "StaleArp";
    case Errc::RoutingLoop: return "RoutingLoop";
    case Errc::UnroutedFlow: return "UnroutedFlow";
    case Errc::UnknownInterface: return "UnknownInterface";
    case Errc::ParseError: return "ParseError";
    case Errc::UnknownEndpoint: return "UnknownEndpoint";
    case Errc::WindowOutOfRange: return "WindowOutOfRange";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

bool Error::is_validation() const noexcept {
  switch (code_) {
    case Errc::DuplicateSwitchId:
    case Errc::DanglingLink:
    case Errc::MappingGap:
    case Errc::NoDefaultQueue:
    case Errc::InvalidConfig:
    case Errc::ParseError:
    case Errc::UnknownEndpoint:
    case Errc::WindowOutOfRange:
      return true;
    default:
      return false;
  }
}

}  // namespace sliceqos
