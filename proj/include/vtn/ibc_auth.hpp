#pragma once

// Identity-based signing of vehicle tasks.
//
// A trusted authority (TA) holds the master secret and issues each entity a
// long-term identity ID = r1·P, a two-part pseudonym SID = (SID1, SID2) and an
// alias key sid. Vehicles sign each task with a fresh ephemeral key pair; any
// verifier holding pk_TA can check the envelope, and only the TA can map a
// pseudonym back to its long-term identity.
//
//   SID1 = r2·P
//   SID2 = enc(ID) XOR expand(h1(sk_TA·SID1, pk_TA))
//   sid  = r2 + h2(SID)·sk_TA                       (mod q)
//   σ    = sid + h5(pk ‖ h3(SID1‖t) ‖ h4(SID2‖t) ‖ S ‖ t)·sk_V
//   σ·P == SID1 + h5(…)·pk + h2(SID)·pk_TA

#include <cstdint>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "vtn/ec_core.hpp"

namespace vtn::ibc {

using ec::CurveParams;
using ec::CurvePoint;
using ec::Scalar;

// Domain tags for h1..h5, plus one for the SID2 mask stretch.
inline constexpr std::uint8_t kH1 = 1;
inline constexpr std::uint8_t kH2 = 2;
inline constexpr std::uint8_t kH3 = 3;
inline constexpr std::uint8_t kH4 = 4;
inline constexpr std::uint8_t kH5 = 5;
inline constexpr std::uint8_t kMaskExpand = 0x10;

inline constexpr std::uint64_t kDefaultFreshnessWindowMs = 300'000;

class UnknownIdentityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline Bytes encode_u64(std::uint64_t v) {
  Bytes out(8);
  for (int i = 7; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v);
    v >>= 8;
  }
  return out;
}

struct PseudoIdentity {
  CurvePoint sid1 = CurvePoint::identity();
  Bytes sid2;

  Bytes encode(const CurveParams& params) const {
    Bytes out = ec::encode_point(sid1, params);
    out.insert(out.end(), sid2.begin(), sid2.end());
    return out;
  }
  friend bool operator==(const PseudoIdentity&, const PseudoIdentity&) = default;
};

/// What a registered entity receives. Never contains sk_TA or r1/r2.
struct VehicleCredentials {
  CurvePoint id = CurvePoint::identity();
  PseudoIdentity pseudonym;
  Scalar alias_key;
};

using TrackingHandle = Bytes;

struct Registration {
  VehicleCredentials credentials;
  TrackingHandle handle;
};

// Held by the TA only.
struct RegistrationRecord {
  VehicleCredentials credentials;
  Scalar r1, r2;
};

struct TwinRecord {
  CurvePoint id = CurvePoint::identity();
  PseudoIdentity pseudonym;
  Scalar alias_key;
  TrackingHandle handle;
  double compute_ghz = 1.0;
  double speed_mps = 25.0;
};

inline TwinRecord make_twin_record(const Registration& reg, double compute_ghz, double speed_mps) {
  return TwinRecord{reg.credentials.id, reg.credentials.pseudonym, reg.credentials.alias_key, reg.handle,
                    compute_ghz, speed_mps};
}

inline Scalar h2_pseudonym(const PseudoIdentity& sid, const CurveParams& params) {
  return ec::hash_to_scalar(kH2, {ec::encode_point(sid.sid1, params), sid.sid2}, params);
}

inline Bytes sid2_mask(const CurvePoint& shared, const CurvePoint& pk_ta, const CurveParams& params) {
  Scalar h1 = ec::hash_to_scalar(kH1, {ec::encode_point(shared, params), ec::encode_point(pk_ta, params)}, params);
  return ec::expand_bytes(ec::encode_scalar(h1, params), params.point_bytes(), kMaskExpand);
}

inline Bytes xor_bytes(std::span<const std::uint8_t> lhs, std::span<const std::uint8_t> rhs) {
  if (lhs.size() != rhs.size()) throw std::invalid_argument("xor operands differ in length");
  Bytes out(lhs.size());
  for (std::size_t i = 0; i < lhs.size(); ++i) out[i] = lhs[i] ^ rhs[i];
  return out;
}

/// Trusted authority: master key pair plus the registry of issued pseudonyms.
/// Registration and tracking lock the registry internally.
class TrustedAuthority {
 public:
  TrustedAuthority(CurveParams params, std::uint64_t rng_seed) : params_(std::move(params)) {
    std::mt19937_64 rng(rng_seed);
    master_secret_ = ec::random_nonzero_scalar(rng, params_);
    master_public_ = ec::base_mult(master_secret_, params_);
  }

  const CurveParams& params() const { return params_; }
  const CurvePoint& public_key() const { return master_public_; }
  // Exposed for tests that recheck pk_TA = sk_TA·P.
  const Scalar& master_secret_for_testing() const { return master_secret_; }

  /// Issues a long-term identity and pseudonym. The same long_term_seed always
  /// yields the same ID; pseudonym_nonce selects fresh r2 for re-registration.
  Registration register_entity(std::uint64_t long_term_seed, std::uint64_t pseudonym_nonce = 0) {
    std::seed_seq id_seq{long_term_seed, std::uint64_t{0x1d}};
    std::mt19937_64 id_rng(id_seq);
    Scalar r1 = ec::random_nonzero_scalar(id_rng, params_);
    std::seed_seq sid_seq{long_term_seed, pseudonym_nonce, std::uint64_t{0x51d}};
    std::mt19937_64 sid_rng(sid_seq);
    Scalar r2 = ec::random_nonzero_scalar(sid_rng, params_);

    VehicleCredentials cred;
    cred.id = ec::base_mult(r1, params_);
    cred.pseudonym.sid1 = ec::base_mult(r2, params_);
    CurvePoint shared = params_.multiply_unreduced(master_secret_.value(), cred.pseudonym.sid1);
    cred.pseudonym.sid2 = xor_bytes(ec::encode_point(cred.id, params_), sid2_mask(shared, master_public_, params_));
    cred.alias_key = params_.add(r2, params_.mul(h2_pseudonym(cred.pseudonym, params_), master_secret_));

    TrackingHandle handle = cred.pseudonym.encode(params_);
    {
      std::lock_guard lock(mutex_);
      registry_.insert_or_assign(handle, RegistrationRecord{cred, r1, r2});
    }
    return Registration{cred, handle};
  }

  /// Recovers the long-term ID behind a pseudonym by regenerating the SID2 mask.
  /// Throws UnknownIdentityError when the result does not decode or was never issued.
  CurvePoint track_identity(const PseudoIdentity& sid) const {
    if (!params_.contains(sid.sid1) || sid.sid1.is_identity())
      throw UnknownIdentityError("pseudonym point is invalid");
    if (sid.sid2.size() != params_.point_bytes()) throw UnknownIdentityError("pseudonym has wrong SID2 width");
    CurvePoint shared = params_.multiply_unreduced(master_secret_.value(), sid.sid1);
    Bytes encoded = xor_bytes(sid.sid2, sid2_mask(shared, master_public_, params_));
    CurvePoint id = CurvePoint::identity();
    try {
      id = ec::decode_point(encoded, params_);
    } catch (const DecodingError&) {
      throw UnknownIdentityError("pseudonym does not unmask to a curve point");
    }
    std::lock_guard lock(mutex_);
    auto it = registry_.find(sid.encode(params_));
    if (it == registry_.end() || !(it->second.credentials.id == id))
      throw UnknownIdentityError("pseudonym was not issued by this authority");
    return id;
  }

  std::size_t registered_count() const {
    std::lock_guard lock(mutex_);
    return registry_.size();
  }

 private:
  CurveParams params_;
  Scalar master_secret_;
  CurvePoint master_public_ = CurvePoint::identity();
  mutable std::mutex mutex_;
  std::map<TrackingHandle, RegistrationRecord> registry_;
};

/// sid·P == SID1 + h2(SID)·pk_TA; anyone can check this for issued credentials.
inline bool credentials_consistent(const VehicleCredentials& cred, const CurvePoint& pk_ta, const CurveParams& params) {
  CurvePoint lhs = ec::base_mult(cred.alias_key, params);
  CurvePoint rhs = ec::point_add(cred.pseudonym.sid1,
                                 ec::scalar_mult(h2_pseudonym(cred.pseudonym, params), pk_ta, params), params);
  return lhs == rhs;
}

struct EphemeralKeyPair {
  Scalar secret;
  CurvePoint public_key = CurvePoint::identity();
};

template <typename Rng>
EphemeralKeyPair derive_ephemeral_keys(const CurveParams& params, Rng& rng) {
  EphemeralKeyPair keys;
  keys.secret = ec::random_nonzero_scalar(rng, params);
  keys.public_key = ec::base_mult(keys.secret, params);
  return keys;
}

/// h3(SID1‖t) ‖ h4(SID2‖t), each at scalar width.
inline Bytes alias_digest(const PseudoIdentity& sid, std::uint64_t timestamp_ms, const CurveParams& params) {
  Bytes t = encode_u64(timestamp_ms);
  Bytes out = ec::encode_scalar(ec::hash_to_scalar(kH3, {ec::encode_point(sid.sid1, params), t}, params), params);
  Bytes h4 = ec::encode_scalar(ec::hash_to_scalar(kH4, {sid.sid2, t}, params), params);
  out.insert(out.end(), h4.begin(), h4.end());
  return out;
}

inline Scalar task_digest(const CurvePoint& pk, const PseudoIdentity& sid, std::span<const std::uint8_t> payload,
                          std::uint64_t timestamp_ms, const CurveParams& params) {
  return ec::hash_to_scalar(kH5,
                            {ec::encode_point(pk, params), alias_digest(sid, timestamp_ms, params),
                             Bytes(payload.begin(), payload.end()), encode_u64(timestamp_ms)},
                            params);
}

struct SignedTask {
  Bytes payload;
  std::uint64_t timestamp_ms = 0;
  CurvePoint public_key = CurvePoint::identity();
  PseudoIdentity pseudonym;
  Scalar signature;
};

inline SignedTask sign_task(const VehicleCredentials& cred, const EphemeralKeyPair& keys,
                            std::span<const std::uint8_t> payload, std::uint64_t timestamp_ms,
                            const CurveParams& params) {
  Scalar h5 = task_digest(keys.public_key, cred.pseudonym, payload, timestamp_ms, params);
  SignedTask task;
  task.payload.assign(payload.begin(), payload.end());
  task.timestamp_ms = timestamp_ms;
  task.public_key = keys.public_key;
  task.pseudonym = cred.pseudonym;
  task.signature = params.add(cred.alias_key, params.mul(h5, keys.secret));
  return task;
}

enum class Verdict {
  kValid,
  kStaleTimestamp,  // freshness check on t failed
  kRevoked,         // SID is on the revocation list
  kBadSignature,    // σ·P equation does not hold
  kMalformedPoint,  // an envelope field does not decode to a valid group element
};

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kValid: return "valid";
    case Verdict::kStaleTimestamp: return "stale-timestamp";
    case Verdict::kRevoked: return "revoked";
    case Verdict::kBadSignature: return "bad-signature";
    case Verdict::kMalformedPoint: return "malformed-point";
  }
  return "unknown";
}

/// Checks, in order: timestamp freshness, well-formedness, revocation, and the
/// signature equation. Reports the first condition that fails.
inline Verdict verify_task(const SignedTask& task, const CurvePoint& pk_ta, const CurveParams& params,
                           std::uint64_t now_ms, std::uint64_t freshness_window_ms,
                           const std::set<Bytes>* revoked = nullptr) {
  std::uint64_t age = now_ms >= task.timestamp_ms ? now_ms - task.timestamp_ms : task.timestamp_ms - now_ms;
  if (age > freshness_window_ms) return Verdict::kStaleTimestamp;

  if (!params.contains(task.public_key) || task.public_key.is_identity() || !params.contains(task.pseudonym.sid1) ||
      task.pseudonym.sid1.is_identity() || task.pseudonym.sid2.size() != params.point_bytes() ||
      !params.contains(pk_ta))
    return Verdict::kMalformedPoint;

  if (revoked != nullptr && revoked->contains(task.pseudonym.encode(params))) return Verdict::kRevoked;

  Scalar h5 = task_digest(task.public_key, task.pseudonym, task.payload, task.timestamp_ms, params);
  Scalar h2 = h2_pseudonym(task.pseudonym, params);
  CurvePoint lhs = ec::base_mult(task.signature, params);
  CurvePoint rhs = ec::point_add(task.pseudonym.sid1, params.multiply_unreduced(h5.value(), task.public_key), params);
  rhs = ec::point_add(rhs, params.multiply_unreduced(h2.value(), pk_ta), params);
  return lhs == rhs ? Verdict::kValid : Verdict::kBadSignature;
}

/// Bytes of (t, pk, SID1, SID2, σ) on the wire. Independent of the payload.
inline std::size_t auth_overhead_bytes(const CurveParams& params) {
  return 8 + 3 * params.point_bytes() + params.scalar_bytes();
}

// S-len(4, BE) ‖ S ‖ t(8, BE) ‖ pk ‖ SID1 ‖ SID2 ‖ σ
inline Bytes serialize_task(const SignedTask& task, const CurveParams& params) {
  if (task.public_key.is_identity() || task.pseudonym.sid1.is_identity())
    throw std::invalid_argument("signed task carries an identity point");
  Bytes out;
  out.reserve(4 + task.payload.size() + auth_overhead_bytes(params));
  auto len = static_cast<std::uint32_t>(task.payload.size());
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(len >> shift));
  out.insert(out.end(), task.payload.begin(), task.payload.end());
  Bytes t = encode_u64(task.timestamp_ms);
  out.insert(out.end(), t.begin(), t.end());
  for (const Bytes& part : {ec::encode_point(task.public_key, params), ec::encode_point(task.pseudonym.sid1, params),
                            task.pseudonym.sid2, ec::encode_scalar(task.signature, params)})
    out.insert(out.end(), part.begin(), part.end());
  return out;
}

/// Throws DecodingError on truncated input, bad lengths, or off-curve points.
inline SignedTask parse_task(std::span<const std::uint8_t> wire, const CurveParams& params) {
  std::size_t pos = 0;
  auto take = [&](std::size_t count) {
    if (wire.size() - pos < count) throw DecodingError("signed task is truncated");
    auto part = wire.subspan(pos, count);
    pos += count;
    return part;
  };
  std::uint32_t len = 0;
  for (std::uint8_t byte : take(4)) len = (len << 8) | byte;
  if (wire.size() - 4 != std::size_t{len} + auth_overhead_bytes(params))
    throw DecodingError("signed task length does not match payload length field");

  SignedTask task;
  auto payload = take(len);
  task.payload.assign(payload.begin(), payload.end());
  for (std::uint8_t byte : take(8)) task.timestamp_ms = (task.timestamp_ms << 8) | byte;
  task.public_key = ec::decode_point(take(params.point_bytes()), params);
  task.pseudonym.sid1 = ec::decode_point(take(params.point_bytes()), params);
  auto sid2 = take(params.point_bytes());
  task.pseudonym.sid2.assign(sid2.begin(), sid2.end());
  task.signature = ec::decode_scalar(take(params.scalar_bytes()), params);
  return task;
}

/// Verifier-side state: pk_TA, freshness window, and the revocation list.
class TaskVerifier {
 public:
  TaskVerifier(CurveParams params, CurvePoint pk_ta, std::uint64_t freshness_window_ms = kDefaultFreshnessWindowMs)
      : params_(std::move(params)), pk_ta_(std::move(pk_ta)), window_ms_(freshness_window_ms) {}

  void revoke(const PseudoIdentity& sid) { revoked_.insert(sid.encode(params_)); }
  void reinstate(const PseudoIdentity& sid) { revoked_.erase(sid.encode(params_)); }

  Verdict verify(const SignedTask& task, std::uint64_t now_ms) const {
    return verify_task(task, pk_ta_, params_, now_ms, window_ms_, &revoked_);
  }

  // Undecodable bytes are reported as kMalformedPoint.
  Verdict verify_wire(std::span<const std::uint8_t> wire, std::uint64_t now_ms) const {
    try {
      return verify(parse_task(wire, params_), now_ms);
    } catch (const DecodingError&) {
      return Verdict::kMalformedPoint;
    }
  }

 private:
  CurveParams params_;
  CurvePoint pk_ta_;
  std::uint64_t window_ms_;
  std::set<Bytes> revoked_;
};

}  // namespace vtn::ibc
