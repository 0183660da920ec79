// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <set>
#include <string>

#include "json.hpp"

#include "milpfix/error.hpp"

namespace milpfix {

/// Reads optional keys of one config object into existing defaults and
/// rejects anything it was not asked about.
class ConfigFields {
 public:
  ConfigFields(const nlohmann::json& object, std::string section) : object_(object), section_(std::move(section)) {
    if (!object_.is_object()) fail(ErrorCode::ConfigError, section_ + " must be an object");
  }

  template <typename T>
  ConfigFields& read(const std::string& key, T& target) {
    seen_.insert(key);
    auto it = object_.find(key);
    if (it == object_.end()) return *this;
    try {
      target = it->template get<T>();
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::ConfigError, path(key) + ": " + e.what());
    }
    return *this;
  }

  /// Marks `key` as known and returns its value, or null when absent.
  const nlohmann::json* section(const std::string& key) {
    seen_.insert(key);
    auto it = object_.find(key);
    return it == object_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [key, value] : object_.items()) {
      if (!seen_.count(key)) fail(ErrorCode::ConfigError, "unknown key " + path(key));
    }
  }

  std::string path(const std::string& key) const { return section_ + "." + key; }

 private:
  const nlohmann::json& object_;
  std::string section_;
  std::set<std::string> seen_;
};

}  // namespace milpfix
