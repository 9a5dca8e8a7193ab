#pragma once

// Prime-field and short-Weierstrass curve arithmetic. Variable-time; meant
// for simulation and verification, not for handling real secrets.

#include <openssl/sha.h>

#include <boost/integer/mod_inverse.hpp>
#include <boost/multiprecision/cpp_int.hpp>
#include <boost/multiprecision/miller_rabin.hpp>
#include <boost/random/mersenne_twister.hpp>

#include <array>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vtn {

using BigInt = boost::multiprecision::cpp_int;
using Bytes = std::vector<std::uint8_t>;

class EcError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a point handed to the group law is not on the curve.
class PointValidationError : public EcError {
 public:
  using EcError::EcError;
};

class DecodingError : public EcError {
 public:
  using EcError::EcError;
};

class CurveParamsError : public EcError {
 public:
  using EcError::EcError;
};

namespace ec {

namespace detail {

inline BigInt mod(const BigInt& v, const BigInt& m) {
  BigInt r = v % m;
  if (r < 0) r += m;
  return r;
}

inline std::size_t byte_width(const BigInt& modulus) {
  BigInt top = modulus - 1;
  std::size_t bits = top == 0 ? 1 : boost::multiprecision::msb(top) + 1;
  return (bits + 7) / 8;
}

inline Bytes to_fixed_bytes(const BigInt& v, std::size_t width) {
  Bytes raw;
  if (v != 0) boost::multiprecision::export_bits(v, std::back_inserter(raw), 8);
  if (raw.size() > width) throw EcError("integer does not fit in encoding width");
  Bytes out(width - raw.size(), 0);
  out.insert(out.end(), raw.begin(), raw.end());
  return out;
}

inline BigInt from_bytes(std::span<const std::uint8_t> bytes) {
  BigInt v = 0;
  if (!bytes.empty()) boost::multiprecision::import_bits(v, bytes.begin(), bytes.end(), 8);
  return v;
}

}  // namespace detail

// Integer modulo p. Only CurveParams hands these out, so the value is always reduced.
class FieldElement {
 public:
  FieldElement() = default;
  FieldElement(BigInt v, const BigInt& p) : value_(detail::mod(v, p)) {}

  const BigInt& value() const { return value_; }
  bool is_zero() const { return value_ == 0; }
  friend bool operator==(const FieldElement&, const FieldElement&) = default;

 private:
  BigInt value_{0};
};

// Integer modulo the group order q.
class Scalar {
 public:
  Scalar() = default;
  Scalar(BigInt v, const BigInt& q) : value_(detail::mod(v, q)) {}

  const BigInt& value() const { return value_; }
  bool is_zero() const { return value_ == 0; }
  friend bool operator==(const Scalar&, const Scalar&) = default;

 private:
  BigInt value_{0};
};

class CurvePoint {
 public:
  static CurvePoint identity() { return CurvePoint(); }
  CurvePoint(FieldElement x, FieldElement y) : coords_(std::in_place, std::move(x), std::move(y)) {}

  bool is_identity() const { return !coords_.has_value(); }
  const FieldElement& x() const { return coords_->first; }
  const FieldElement& y() const { return coords_->second; }

  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;

 private:
  CurvePoint() = default;
  std::optional<std::pair<FieldElement, FieldElement>> coords_;
};

inline bool is_on_curve(const CurvePoint& pt, const BigInt& p, const BigInt& a, const BigInt& b) {
  if (pt.is_identity()) return true;
  const BigInt& x = pt.x().value();
  const BigInt& y = pt.y().value();
  return detail::mod(y * y - (x * x * x + a * x + b), p) == 0;
}

namespace detail {
// Jacobian (X, Y, Z) with affine x = X/Z^2, y = Y/Z^3. Z == 0 is the identity.
struct Jacobian {
  BigInt x, y, z;
};

inline Jacobian jacobian_double(const Jacobian& pt, const BigInt& p, const BigInt& a) {
  if (pt.z == 0 || pt.y == 0) return {1, 1, 0};
  BigInt yy = mod(pt.y * pt.y, p);
  BigInt s = mod(4 * pt.x * yy, p);
  BigInt zz = mod(pt.z * pt.z, p);
  BigInt m = mod(3 * pt.x * pt.x + a * zz * zz, p);
  BigInt x3 = mod(m * m - 2 * s, p);
  BigInt y3 = mod(m * (s - x3) - 8 * yy * yy, p);
  BigInt z3 = mod(2 * pt.y * pt.z, p);
  return {x3, y3, z3};
}

inline Jacobian jacobian_add(const Jacobian& lhs, const Jacobian& rhs, const BigInt& p, const BigInt& a) {
  if (lhs.z == 0) return rhs;
  if (rhs.z == 0) return lhs;
  BigInt z1z1 = mod(lhs.z * lhs.z, p);
  BigInt z2z2 = mod(rhs.z * rhs.z, p);
  BigInt u1 = mod(lhs.x * z2z2, p);
  BigInt u2 = mod(rhs.x * z1z1, p);
  BigInt s1 = mod(lhs.y * rhs.z * z2z2, p);
  BigInt s2 = mod(rhs.y * lhs.z * z1z1, p);
  if (u1 == u2) {
    if (s1 != s2) return {1, 1, 0};
    return jacobian_double(lhs, p, a);
  }
  BigInt h = mod(u2 - u1, p);
  BigInt r = mod(s2 - s1, p);
  BigInt hh = mod(h * h, p);
  BigInt hhh = mod(hh * h, p);
  BigInt v = mod(u1 * hh, p);
  BigInt x3 = mod(r * r - hhh - 2 * v, p);
  BigInt y3 = mod(r * (v - x3) - s1 * hhh, p);
  BigInt z3 = mod(h * lhs.z * rhs.z, p);
  return {x3, y3, z3};
}
}  // namespace detail

/// Domain parameters (p, a, b, P, q, cofactor) of a short-Weierstrass curve.
///
/// Construction validates non-singularity, that the generator lies on the
/// curve with q·P = identity, and probable primality of p and q.
class CurveParams {
 public:
  CurveParams(std::string name, BigInt p, BigInt a, BigInt b, BigInt gx, BigInt gy, BigInt q, BigInt cofactor)
      : name_(std::move(name)),
        p_(std::move(p)),
        a_(),
        b_(),
        q_(std::move(q)),
        cofactor_(std::move(cofactor)),
        generator_(CurvePoint::identity()) {
    if (p_ < 3) throw CurveParamsError("field prime must be at least 3");
    if (q_ < 2) throw CurveParamsError("group order must be at least 2");
    if (cofactor_ < 1) throw CurveParamsError("cofactor must be positive");
    a_ = detail::mod(a, p_);
    b_ = detail::mod(b, p_);
    boost::random::mt19937 prng(0x5eed);
    if (!boost::multiprecision::miller_rabin_test(p_, 25, prng)) throw CurveParamsError("p is not prime");
    if (!boost::multiprecision::miller_rabin_test(q_, 25, prng)) throw CurveParamsError("q is not prime");
    if (detail::mod(4 * a_ * a_ * a_ + 27 * b_ * b_, p_) == 0) throw CurveParamsError("curve is singular");
    generator_ = CurvePoint(field(std::move(gx)), field(std::move(gy)));
    if (!contains(generator_)) throw CurveParamsError("generator is not on the curve");
    if (!multiply_unreduced(q_, generator_).is_identity())
      throw CurveParamsError("generator order does not divide q");
    field_bytes_ = detail::byte_width(p_);
    scalar_bytes_ = detail::byte_width(q_);
  }

  const std::string& name() const { return name_; }
  const BigInt& p() const { return p_; }
  const BigInt& a() const { return a_; }
  const BigInt& b() const { return b_; }
  const BigInt& q() const { return q_; }
  const BigInt& cofactor() const { return cofactor_; }
  const CurvePoint& generator() const { return generator_; }

  std::size_t field_bytes() const { return field_bytes_; }
  std::size_t scalar_bytes() const { return scalar_bytes_; }
  // Marker byte plus the x coordinate.
  std::size_t point_bytes() const { return 1 + field_bytes_; }

  FieldElement field(BigInt v) const { return FieldElement(std::move(v), p_); }
  Scalar scalar(BigInt v) const { return Scalar(std::move(v), q_); }

  Scalar add(const Scalar& lhs, const Scalar& rhs) const { return scalar(lhs.value() + rhs.value()); }
  Scalar sub(const Scalar& lhs, const Scalar& rhs) const { return scalar(lhs.value() - rhs.value()); }
  Scalar mul(const Scalar& lhs, const Scalar& rhs) const { return scalar(lhs.value() * rhs.value()); }

  bool contains(const CurvePoint& pt) const { return is_on_curve(pt, p_, a_, b_); }

  // k·pt for an arbitrary non-negative k (not reduced mod q). Skips validation.
  CurvePoint multiply_unreduced(const BigInt& k, const CurvePoint& pt) const {
    if (pt.is_identity() || k == 0) return CurvePoint::identity();
    detail::Jacobian base{pt.x().value(), pt.y().value(), 1};
    detail::Jacobian acc{1, 1, 0};
    for (std::size_t bit = boost::multiprecision::msb(k) + 1; bit-- > 0;) {
      acc = detail::jacobian_double(acc, p_, a_);
      if (boost::multiprecision::bit_test(k, static_cast<unsigned>(bit))) acc = detail::jacobian_add(acc, base, p_, a_);
    }
    return to_affine(acc);
  }

  CurvePoint to_affine(const detail::Jacobian& pt) const {
    if (pt.z == 0) return CurvePoint::identity();
    BigInt zinv = boost::integer::mod_inverse(pt.z, p_);
    BigInt zinv2 = detail::mod(zinv * zinv, p_);
    return CurvePoint(field(pt.x * zinv2), field(pt.y * zinv2 * zinv));
  }

 private:
  std::string name_;
  BigInt p_, a_, b_, q_, cofactor_;
  CurvePoint generator_;
  std::size_t field_bytes_ = 0;
  std::size_t scalar_bytes_ = 0;
};

inline void require_on_curve(const CurvePoint& pt, const CurveParams& params) {
  if (!params.contains(pt)) throw PointValidationError("point is not on curve " + params.name());
}

inline CurvePoint point_negate(const CurvePoint& pt, const CurveParams& params) {
  if (pt.is_identity()) return pt;
  return CurvePoint(pt.x(), params.field(-pt.y().value()));
}

/// Affine group law. Handles the identity, inverse pairs and doubling.
inline CurvePoint point_add(const CurvePoint& lhs, const CurvePoint& rhs, const CurveParams& params) {
  require_on_curve(lhs, params);
  require_on_curve(rhs, params);
  if (lhs.is_identity()) return rhs;
  if (rhs.is_identity()) return lhs;

  const BigInt& p = params.p();
  const BigInt& x1 = lhs.x().value();
  const BigInt& y1 = lhs.y().value();
  const BigInt& x2 = rhs.x().value();
  const BigInt& y2 = rhs.y().value();

  BigInt slope;
  if (x1 == x2) {
    if (detail::mod(y1 + y2, p) == 0) return CurvePoint::identity();
    slope = detail::mod((3 * x1 * x1 + params.a()) * boost::integer::mod_inverse(detail::mod(2 * y1, p), p), p);
  } else {
    slope = detail::mod((y2 - y1) * boost::integer::mod_inverse(detail::mod(x2 - x1, p), p), p);
  }
  BigInt x3 = detail::mod(slope * slope - x1 - x2, p);
  BigInt y3 = detail::mod(slope * (x1 - x3) - y1, p);
  return CurvePoint(params.field(x3), params.field(y3));
}

/// k·pt by left-to-right double-and-add in Jacobian coordinates.
inline CurvePoint scalar_mult(const Scalar& k, const CurvePoint& pt, const CurveParams& params) {
  require_on_curve(pt, params);
  return params.multiply_unreduced(k.value(), pt);
}

inline CurvePoint base_mult(const Scalar& k, const CurveParams& params) {
  return params.multiply_unreduced(k.value(), params.generator());
}

// Square root mod an odd prime (Tonelli-Shanks). Empty when n is a non-residue.
inline std::optional<BigInt> sqrt_mod(const BigInt& n_in, const BigInt& p) {
  using boost::multiprecision::powm;
  BigInt n = detail::mod(n_in, p);
  if (n == 0) return BigInt(0);
  if (powm(n, (p - 1) / 2, p) != 1) return std::nullopt;
  if (detail::mod(p, 4) == 3) return BigInt(powm(n, (p + 1) / 4, p));

  BigInt q = p - 1;
  unsigned s = 0;
  while ((q & 1) == 0) {
    q >>= 1;
    ++s;
  }
  BigInt z = 2;
  while (powm(z, (p - 1) / 2, p) != p - 1) ++z;
  BigInt m = s;
  BigInt c = powm(z, q, p);
  BigInt t = powm(n, q, p);
  BigInt r = powm(n, (q + 1) / 2, p);
  while (t != 1) {
    unsigned i = 0;
    BigInt t2 = t;
    while (t2 != 1) {
      t2 = detail::mod(t2 * t2, p);
      ++i;
    }
    BigInt b = c;
    for (BigInt j = 0; j < m - i - 1; ++j) b = detail::mod(b * b, p);
    m = i;
    c = detail::mod(b * b, p);
    t = detail::mod(t * c, p);
    r = detail::mod(r * b, p);
  }
  return r;
}

inline constexpr std::uint8_t kIdentityMarker = 0x00;
inline constexpr std::uint8_t kEvenMarker = 0x02;
inline constexpr std::uint8_t kOddMarker = 0x03;

// Compressed form: one marker byte carrying the parity of y, then x at field
// width. The identity is the lone marker byte 0x00.
inline Bytes encode_point(const CurvePoint& pt, const CurveParams& params) {
  if (pt.is_identity()) return Bytes{kIdentityMarker};
  Bytes out;
  out.reserve(params.point_bytes());
  out.push_back(boost::multiprecision::bit_test(pt.y().value(), 0) ? kOddMarker : kEvenMarker);
  Bytes x = detail::to_fixed_bytes(pt.x().value(), params.field_bytes());
  out.insert(out.end(), x.begin(), x.end());
  return out;
}

inline CurvePoint decode_point(std::span<const std::uint8_t> bytes, const CurveParams& params) {
  if (bytes.empty()) throw DecodingError("empty point encoding");
  if (bytes[0] == kIdentityMarker) {
    if (bytes.size() != 1) throw DecodingError("identity encoding has trailing bytes");
    return CurvePoint::identity();
  }
  if (bytes[0] != kEvenMarker && bytes[0] != kOddMarker) throw DecodingError("unknown point marker");
  if (bytes.size() != params.point_bytes()) throw DecodingError("point encoding has wrong length");
  BigInt x = detail::from_bytes(bytes.subspan(1));
  if (x >= params.p()) throw DecodingError("x coordinate out of range");
  auto y = sqrt_mod(x * x * x + params.a() * x + params.b(), params.p());
  if (!y) throw DecodingError("x coordinate is not on the curve");
  bool want_odd = bytes[0] == kOddMarker;
  if (boost::multiprecision::bit_test(*y, 0) != want_odd) {
    if (*y == 0) throw DecodingError("no point with requested parity");
    *y = params.p() - *y;
  }
  return CurvePoint(params.field(x), params.field(*y));
}

inline Bytes encode_scalar(const Scalar& s, const CurveParams& params) {
  return detail::to_fixed_bytes(s.value(), params.scalar_bytes());
}

// Rejects values >= q rather than silently reducing them.
inline Scalar decode_scalar(std::span<const std::uint8_t> bytes, const CurveParams& params) {
  if (bytes.size() != params.scalar_bytes()) throw DecodingError("scalar encoding has wrong length");
  BigInt v = detail::from_bytes(bytes);
  if (v >= params.q()) throw DecodingError("scalar out of range");
  return params.scalar(v);
}

inline std::array<std::uint8_t, SHA256_DIGEST_LENGTH> sha256(std::span<const std::uint8_t> message) {
  std::array<std::uint8_t, SHA256_DIGEST_LENGTH> digest{};
  SHA256(message.data(), message.size(), digest.data());
  return digest;
}

// tag || for each input: 4-byte big-endian length || bytes
inline Bytes length_prefixed(std::uint8_t tag, std::span<const Bytes> inputs) {
  Bytes message{tag};
  for (const Bytes& item : inputs) {
    auto len = static_cast<std::uint32_t>(item.size());
    for (int shift = 24; shift >= 0; shift -= 8) message.push_back(static_cast<std::uint8_t>(len >> shift));
    message.insert(message.end(), item.begin(), item.end());
  }
  return message;
}

/// SHA-256 over the domain tag and the length-prefixed inputs, reduced mod q.
/// Tags 1..5 give the five independent hash functions used by the signature scheme.
inline Scalar hash_to_scalar(std::uint8_t domain_tag, std::span<const Bytes> inputs, const CurveParams& params) {
  if (inputs.empty()) throw std::invalid_argument("hash_to_scalar needs at least one input");
  auto digest = sha256(length_prefixed(domain_tag, inputs));
  return params.scalar(detail::from_bytes(digest));
}

inline Scalar hash_to_scalar(std::uint8_t domain_tag, std::initializer_list<Bytes> inputs, const CurveParams& params) {
  return hash_to_scalar(domain_tag, std::span<const Bytes>(inputs.begin(), inputs.size()), params);
}

// Counter-mode SHA-256 stretch of a seed to `length` bytes.
inline Bytes expand_bytes(std::span<const std::uint8_t> seed, std::size_t length, std::uint8_t domain_tag) {
  Bytes out;
  out.reserve(length);
  for (std::uint32_t counter = 0; out.size() < length; ++counter) {
    Bytes block{domain_tag};
    for (int shift = 24; shift >= 0; shift -= 8) block.push_back(static_cast<std::uint8_t>(counter >> shift));
    block.insert(block.end(), seed.begin(), seed.end());
    auto digest = sha256(block);
    std::size_t take = std::min<std::size_t>(digest.size(), length - out.size());
    out.insert(out.end(), digest.begin(), digest.begin() + static_cast<std::ptrdiff_t>(take));
  }
  return out;
}

/// Uniform scalar in [1, q) by rejection sampling on 64-bit words.
template <typename Rng>
Scalar random_nonzero_scalar(Rng& rng, const CurveParams& params) {
  const std::size_t words = (params.scalar_bytes() + 7) / 8;
  const unsigned bits = boost::multiprecision::msb(params.q()) + 1;
  for (;;) {
    BigInt v = 0;
    for (std::size_t i = 0; i < words; ++i) {
      v <<= 64;
      v |= static_cast<std::uint64_t>(rng());
    }
    v &= (BigInt(1) << bits) - 1;
    if (v != 0 && v < params.q()) return params.scalar(v);
  }
}

}  // namespace ec
}  // namespace vtn
