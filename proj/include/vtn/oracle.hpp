#pragma once

// Exact baselines for small instances: the closed-form cloud split for a fixed
// offload set, and exhaustive search over all offload sets.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "vtn/latency_model.hpp"

namespace vtn::oracle {

using latency::CostConstants;
using latency::VehicleProfile;

inline constexpr std::size_t kMaxExhaustiveVehicles = 20;

class BudgetError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A frozen (jitter-free) instance.
struct InstanceSpec {
  std::vector<VehicleProfile> vehicles;
  double capacity_ghz = 20.0;
  CostConstants costs;
};

/// Minimizes Σ w_i / f_i subject to Σ f_i = F: f_i = F·√w_i / Σ_j √w_j.
inline std::vector<double> optimal_allocation(std::span<const double> weights, double capacity_ghz) {
  if (weights.empty()) throw latency::DomainError("optimal_allocation needs a non-empty offload set");
  double root_sum = 0.0;
  for (double w : weights) {
    if (!(w > 0)) throw latency::DomainError("allocation weights must be positive");
    root_sum += std::sqrt(w);
  }
  std::vector<double> alloc;
  alloc.reserve(weights.size());
  for (double w : weights) alloc.push_back(capacity_ghz * std::sqrt(w) / root_sum);
  return alloc;
}

/// Weight d·(c_sign + c_verify) of each vehicle in `members`.
inline std::vector<double> processing_weights(const InstanceSpec& inst, std::span<const std::size_t> members) {
  std::vector<double> w;
  w.reserve(members.size());
  for (std::size_t i : members) w.push_back(inst.vehicles[i].task_bytes * inst.vehicles[i].cycles_per_byte());
  return w;
}

struct OracleResult {
  std::vector<int> decisions;
  std::vector<double> allocation_ghz;  // zero for vehicles kept local
  double total_latency_s = std::numeric_limits<double>::infinity();
};

/// Enumerates every offload set; within each set the closed-form split is
/// optimal because the congestion divisor only touches allocation-free terms.
/// Ties keep the earlier mask (fewer offloads first in bit order), so equal
/// local/cloud cost resolves to local.
inline OracleResult exhaustive_best(const InstanceSpec& inst) {
  const std::size_t n = inst.vehicles.size();
  if (n > kMaxExhaustiveVehicles) throw BudgetError("exhaustive search is limited to 20 vehicles");
  if (n == 0) throw latency::DomainError("instance has no vehicles");

  std::vector<double> local(n);
  for (std::size_t i = 0; i < n; ++i) local[i] = latency::local_latency(inst.vehicles[i]);

  OracleResult best;
  std::vector<std::size_t> members;
  std::vector<double> alloc(n);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    members.clear();
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1U) members.push_back(i);

    double total = 0.0;
    std::fill(alloc.begin(), alloc.end(), 0.0);
    if (!members.empty()) {
      auto split = optimal_allocation(processing_weights(inst, members), inst.capacity_ghz);
      for (std::size_t k = 0; k < members.size(); ++k) alloc[members[k]] = split[k];
    }
    for (std::size_t i = 0; i < n; ++i)
      total += (mask >> i & 1U) ? latency::cloud_latency(inst.vehicles[i], alloc[i], inst.costs, members.size())
                                : local[i];
    if (total < best.total_latency_s) {
      best.total_latency_s = total;
      best.allocation_ghz = alloc;
      best.decisions.assign(n, 0);
      for (std::size_t i : members) best.decisions[i] = 1;
    }
  }
  return best;
}

}  // namespace vtn::oracle
