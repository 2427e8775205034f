#pragma once

// Fluid two-rate three-color marker. Bucket sizes are in kB; one kB is
// 8/1000 Mb.

namespace sliceqos {

struct TrTcmConfig {
  double cir_mbps = 0.0;
  double pir_mbps = 0.0;
  double cbs_kb = 64.0;
  double pbs_kb = 64.0;

  /// Throws InvalidConfig unless 0 < cir <= pir and both bursts are positive.
  void validate() const;
  bool operator==(const TrTcmConfig&) const = default;
};

/// Token levels in Mb.
struct TrTcmState {
  double committed_mb = 0.0;
  double peak_mb = 0.0;

  static TrTcmState full(const TrTcmConfig& cfg);
};

struct Colored {
  double green_mbps = 0.0;
  double yellow_mbps = 0.0;
  double red_mbps = 0.0;
};

inline double kb_to_mb(double kb) { return kb * 8.0 / 1000.0; }
inline double mb_to_kb(double mb) { return mb * 1000.0 / 8.0; }

/// Colors `offered_mbps` sustained over `dt_s`. Traffic that fits the peak
/// bucket is yellow or green; green is the part that also fits the committed
/// bucket. Buckets refill at pir/cir and are capped at pbs/cbs.
Colored police_trtcm(const TrTcmConfig& cfg, TrTcmState& state, double offered_mbps, double dt_s);

}  // namespace sliceqos
