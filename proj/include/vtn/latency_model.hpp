#pragma once

// Latency of running an authenticated task locally versus offloading it.
// Units: bytes, cycles/byte, GHz (1e9 cycles/s), Mbps (1e6 bit/s), seconds.

#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace vtn::latency {

class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConstraintError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kGiga = 1e9;
inline constexpr double kMega = 1e6;
inline constexpr double kBitsPerByte = 8.0;

struct CostConstants {
  double sign_cycles_per_byte = 36'000.0;
  double verify_cycles_per_byte = 94'000.0;
  // Intrinsic processing cost charged per byte when no authentication is used.
  double base_cycles_per_byte = 10'000.0;
  double speed_of_light_mps = 3.0e8;
  double cloud_distance_km = 100.0;

  void validate() const {
    if (!(sign_cycles_per_byte > 0 && verify_cycles_per_byte > 0 && base_cycles_per_byte > 0 &&
          speed_of_light_mps > 0 && cloud_distance_km >= 0))
      throw DomainError("cost constants must be positive");
  }
};

enum class IbcMode { kWithIbc, kWithoutIbc };

inline const char* to_string(IbcMode mode) { return mode == IbcMode::kWithIbc ? "with-ibc" : "without-ibc"; }

inline IbcMode parse_ibc_mode(const std::string& text) {
  if (text == "with-ibc" || text == "with" || text == "w") return IbcMode::kWithIbc;
  if (text == "without-ibc" || text == "without" || text == "wo") return IbcMode::kWithoutIbc;
  throw DomainError("unknown ibc mode '" + text + "'");
}

struct VehicleProfile {
  double compute_ghz = 1.0;
  double speed_mps = 25.0;  // carried for the twin record; no latency term uses it
  double payload_bytes = 0.0;
  double task_bytes = 0.0;  // payload plus authentication overhead when signed
  double sign_cycles_per_byte = 0.0;
  double verify_cycles_per_byte = 0.0;
  double uplink_mbps = 100.0;
  double downlink_mbps = 100.0;

  double cycles_per_byte() const { return sign_cycles_per_byte + verify_cycles_per_byte; }
};

struct CloudProfile {
  double capacity_ghz = 20.0;
  std::vector<double> allocation_ghz;
};

/// Task size and per-byte crypto cost for one IBC mode.
struct TaskShape {
  double task_bytes = 0.0;
  double sign_cycles_per_byte = 0.0;
  double verify_cycles_per_byte = 0.0;
};

/// With IBC the envelope overhead is added and the signing/verification costs
/// apply; without it the task is the bare payload processed at the base cost.
inline TaskShape ibc_mode_profile(double payload_bytes, IbcMode mode, std::size_t overhead_bytes,
                                  const CostConstants& c) {
  if (mode == IbcMode::kWithIbc)
    return {payload_bytes + static_cast<double>(overhead_bytes), c.sign_cycles_per_byte, c.verify_cycles_per_byte};
  return {payload_bytes, c.base_cycles_per_byte, c.base_cycles_per_byte};
}

inline double local_latency(const VehicleProfile& v) {
  if (!(v.compute_ghz > 0)) throw DomainError("vehicle compute capacity must be positive");
  return v.task_bytes * v.cycles_per_byte() / (v.compute_ghz * kGiga);
}

inline double propagation_delay(const CostConstants& c) {
  return 2.0 * c.cloud_distance_km * 1000.0 / c.speed_of_light_mps;
}

/// Upload + cloud processing + download + round-trip propagation. Link rates are
/// shared by `congestion_divisor` concurrently offloading vehicles.
inline double cloud_latency(const VehicleProfile& v, double alloc_ghz, const CostConstants& c,
                            std::size_t congestion_divisor) {
  if (!(alloc_ghz > 0)) throw DomainError("cloud allocation must be positive");
  if (!(v.uplink_mbps > 0 && v.downlink_mbps > 0)) throw DomainError("link rates must be positive");
  if (congestion_divisor < 1) throw DomainError("congestion divisor must be at least 1");
  const double share = static_cast<double>(congestion_divisor);
  const double bits = v.task_bytes * kBitsPerByte;
  double upload = bits / (v.uplink_mbps * kMega / share);
  double processing = v.task_bytes * v.cycles_per_byte() / (alloc_ghz * kGiga);
  double download = bits / (v.downlink_mbps * kMega / share);
  return upload + processing + download + propagation_delay(c);
}

// Relative slack on Σ f ≤ F to absorb rounding from proportional rescaling.
inline constexpr double kCapacitySlack = 1e-9;

inline void check_allocation(std::span<const int> decisions, std::span<const double> alloc_ghz, double capacity_ghz) {
  double total = 0.0;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    if (decisions[i] == 0) continue;
    double f = alloc_ghz[i];
    if (!(f > 0) || f > capacity_ghz * (1 + kCapacitySlack)) {
      std::ostringstream msg;
      msg << "allocation for vehicle " << i << " is " << f << " GHz, outside (0, " << capacity_ghz << "]";
      throw ConstraintError(msg.str());
    }
    total += f;
  }
  if (total > capacity_ghz * (1 + kCapacitySlack)) {
    std::ostringstream msg;
    msg << "sum of offloaded allocations " << total << " GHz exceeds cloud capacity " << capacity_ghz << " GHz";
    throw ConstraintError(msg.str());
  }
}

struct LatencyBreakdown {
  double total_s = 0.0;
  std::vector<double> per_vehicle_s;
  std::size_t offloaded = 0;
};

/// Σ (1 - x_i)·local_i + x_i·cloud_i with the congestion divisor equal to the
/// number of offloading vehicles.
inline LatencyBreakdown total_latency_breakdown(std::span<const int> decisions, std::span<const VehicleProfile> vehicles,
                                                const CloudProfile& cloud, const CostConstants& c) {
  if (decisions.size() != vehicles.size() || decisions.size() != cloud.allocation_ghz.size())
    throw DomainError("decision, vehicle and allocation counts differ");
  check_allocation(decisions, cloud.allocation_ghz, cloud.capacity_ghz);

  LatencyBreakdown out;
  for (int x : decisions) out.offloaded += x != 0 ? 1 : 0;
  std::size_t divisor = out.offloaded == 0 ? 1 : out.offloaded;
  out.per_vehicle_s.resize(vehicles.size());
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    double t = decisions[i] != 0 ? cloud_latency(vehicles[i], cloud.allocation_ghz[i], c, divisor)
                                 : local_latency(vehicles[i]);
    out.per_vehicle_s[i] = t;
    out.total_s += t;
  }
  return out;
}

inline double total_latency(std::span<const int> decisions, std::span<const VehicleProfile> vehicles,
                            const CloudProfile& cloud, const CostConstants& c) {
  return total_latency_breakdown(decisions, vehicles, cloud, c).total_s;
}

}  // namespace vtn::latency
