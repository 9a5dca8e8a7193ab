#pragma once

#include <nlohmann/json.hpp>

#include <fstream>
#include <string>

#include "vtn/ec_core.hpp"

namespace vtn::ec {

// y^2 = x^3 + 2x + 2 over F_17, generator (5, 1) of order 19. Small enough to enumerate.
inline const CurveParams& toy_curve() {
  static const CurveParams params("toy17", 17, 2, 2, 5, 1, 19, 1);
  return params;
}

// NIST P-256 / secp256r1.
inline const CurveParams& p256_curve() {
  static const CurveParams params(
      "p256", BigInt("0xffffffff00000001000000000000000000000000ffffffffffffffffffffffff"),
      BigInt("0xffffffff00000001000000000000000000000000fffffffffffffffffffffffc"),
      BigInt("0x5ac635d8aa3a93e7b3ebbd55769886bc651d06b0cc53b0f63bce3c3e27d2604b"),
      BigInt("0x6b17d1f2e12c4247f8bce6e563a440f277037d812deb33a0f4a13945d898c296"),
      BigInt("0x4fe342e2fe1a7f9b8ee7eb4a7c0f9e162bce33576b315ececbb6406837bf51f5"),
      BigInt("0xffffffff00000000ffffffffffffffffbce6faada7179e84f3b9cac2fc632551"), 1);
  return params;
}

namespace detail {
inline BigInt parse_big(const nlohmann::json& node, const char* key) {
  if (!node.contains(key)) throw CurveParamsError(std::string("curve file is missing field '") + key + "'");
  const auto& value = node.at(key);
  if (value.is_number_unsigned()) return BigInt(value.get<std::uint64_t>());
  if (value.is_number_integer()) return BigInt(value.get<std::int64_t>());
  if (!value.is_string()) throw CurveParamsError(std::string("field '") + key + "' must be a string or integer");
  try {
    // cpp_int accepts decimal and 0x-prefixed hex.
    return BigInt(value.get<std::string>());
  } catch (const std::exception&) {
    throw CurveParamsError(std::string("field '") + key + "' is not a decimal or hex integer");
  }
}
}  // namespace detail

/// Reads {p, a, b, Px, Py, q, cofactor} (plus an optional name) from JSON.
inline CurveParams curve_params_from_json(const nlohmann::json& node) {
  std::string name = node.value("name", std::string("custom"));
  return CurveParams(name, detail::parse_big(node, "p"), detail::parse_big(node, "a"), detail::parse_big(node, "b"),
                     detail::parse_big(node, "Px"), detail::parse_big(node, "Py"), detail::parse_big(node, "q"),
                     detail::parse_big(node, "cofactor"));
}

inline CurveParams load_curve_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CurveParamsError("cannot open curve file " + path);
  nlohmann::json node;
  try {
    in >> node;
  } catch (const nlohmann::json::parse_error& e) {
    throw CurveParamsError("curve file " + path + " is not valid JSON: " + e.what());
  }
  return curve_params_from_json(node);
}

/// "toy17" and "p256" resolve to the built-in presets; anything else is a file path.
inline CurveParams resolve_curve(const std::string& name_or_path) {
  if (name_or_path == "toy17") return toy_curve();
  if (name_or_path == "p256") return p256_curve();
  return load_curve_params(name_or_path);
}

}  // namespace vtn::ec
