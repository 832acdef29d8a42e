#include "stitch/json_util.hpp"

#include <algorithm>
#include <cmath>

namespace stitch::jsonu {

json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json to_json(const Pose& p) {
  const auto a = p.to_array();
  return json(std::vector<double>(a.begin(), a.end()));
}

namespace {

void require_numeric_array(const json& j, const std::string& path, std::size_t n) {
  if (!j.is_array() || j.size() != n)
    throw ConfigError(path + ": expected an array of " + std::to_string(n) + " numbers");
  for (const auto& e : j)
    if (!e.is_number()) throw ConfigError(path + ": expected an array of numbers");
}

}  // namespace

Vec3 vec3_at(const json& j, const std::string& path) {
  require_numeric_array(j, path, 3);
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

Pose pose_at(const json& j, const std::string& path) {
  require_numeric_array(j, path, 7);
  std::array<double, 7> v{};
  for (std::size_t i = 0; i < 7; ++i) v[i] = j[i].get<double>();
  const double qn = std::sqrt(v[3] * v[3] + v[4] * v[4] + v[5] * v[5] + v[6] * v[6]);
  if (qn < 1e-9) throw ConfigError(path + ": quaternion has zero norm");
  return Pose::from_array(v);
}

double number_at(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path + ": expected a number");
  return j.get<double>();
}

int integer_at(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path + ": expected an integer");
  return j.get<int>();
}

bool boolean_at(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw ConfigError(path + ": expected true or false");
  return j.get<bool>();
}

std::string string_at(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path + ": expected a string");
  return j.get<std::string>();
}

void check_keys(const json& obj, const std::string& path, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ConfigError((path.empty() ? "<root>" : path) + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError((path.empty() ? key : path + "." + key) + ": unknown field");
  }
}

json parse(std::string_view text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace stitch::jsonu
