#include "sliceqos/trtcm.hpp"

#include <algorithm>
#include <string>

#include "sliceqos/error.hpp"

namespace sliceqos {

void TrTcmConfig::validate() const {
  if (!(cir_mbps > 0.0) || cir_mbps > pir_mbps) {
    throw Error(Errc::InvalidConfig, "trTCM needs 0 < cir <= pir (cir " + std::to_string(cir_mbps) + ", pir " +
                                         std::to_string(pir_mbps) + ")");
  }
  if (!(cbs_kb > 0.0) || !(pbs_kb > 0.0)) throw Error(Errc::InvalidConfig, "trTCM burst sizes must be positive");
}

TrTcmState TrTcmState::full(const TrTcmConfig& cfg) { return {kb_to_mb(cfg.cbs_kb), kb_to_mb(cfg.pbs_kb)}; }

Colored police_trtcm(const TrTcmConfig& cfg, TrTcmState& state, double offered_mbps, double dt_s) {
  const double volume = std::max(0.0, offered_mbps) * dt_s;

  const double peak_tokens = state.peak_mb + cfg.pir_mbps * dt_s;
  const double conforming = std::min(volume, peak_tokens);
  state.peak_mb = std::min(kb_to_mb(cfg.pbs_kb), peak_tokens - conforming);

  const double committed_tokens = state.committed_mb + cfg.cir_mbps * dt_s;
  const double green = std::min(conforming, committed_tokens);
  state.committed_mb = std::min(kb_to_mb(cfg.cbs_kb), committed_tokens - green);

  return {green / dt_s, (conforming - green) / dt_s, (volume - conforming) / dt_s};
}

}  // namespace sliceqos
