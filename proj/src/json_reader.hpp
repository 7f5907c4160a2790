// Copyright 2026 The fmapood Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <initializer_list>
#include <set>
#include <string>

#include "json.hpp"

#include "fmapood/errors.hpp"

namespace fmapood::detail {

using nlohmann::json;

// Typed access to one JSON object with defaults and unknown-key rejection.
class Reader {
 public:
  Reader(const json& j, std::string where, std::initializer_list<const char*> allowed)
      : j_(j), where_(std::move(where)) {
    if (!j.is_object()) raise(ErrorKind::Config, where_ + " must be a JSON object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : j.items()) {
      if (!ok.contains(key)) raise(ErrorKind::Config, "unknown key " + path(key.c_str()));
    }
  }

  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  const json& at(const char* key) const { return j_.at(key); }
  std::string path(const char* key) const { return where_ + "." + key; }

  template <typename T>
  void opt(const char* key, T& out) const {
    if (!has(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      raise(ErrorKind::Config, path(key) + " has the wrong type");
    }
  }

  template <typename T>
  T req(const char* key) const {
    if (!has(key)) raise(ErrorKind::Config, "missing key " + path(key));
    T out{};
    opt(key, out);
    return out;
  }

  std::string str(const char* key, std::string fallback) const {
    opt(key, fallback);
    return fallback;
  }

 private:
  const json& j_;
  std::string where_;
};

// Validation failures in configs surface as ConfigError regardless of origin.
template <typename Fn>
void as_config(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Config) throw;
    raise(ErrorKind::Config, e.what());
  }
}

}  // namespace fmapood::detail
