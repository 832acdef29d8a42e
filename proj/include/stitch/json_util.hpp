#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

#include "stitch/error.hpp"
#include "stitch/pose.hpp"

namespace stitch::jsonu {

using json = nlohmann::json;

json to_json(const Vec3& v);
json to_json(const Pose& p);

Vec3 vec3_at(const json& j, const std::string& path);
Pose pose_at(const json& j, const std::string& path);
double number_at(const json& j, const std::string& path);
int integer_at(const json& j, const std::string& path);
bool boolean_at(const json& j, const std::string& path);
std::string string_at(const json& j, const std::string& path);

/// Throws ConfigError naming `path.key` for any key outside `allowed`.
void check_keys(const json& obj, const std::string& path, std::initializer_list<std::string_view> allowed);

json parse(std::string_view text, const std::string& what);

/// FNV-1a over a byte string; used for config fingerprints.
std::uint64_t fnv1a(std::string_view bytes);

}  // namespace stitch::jsonu
