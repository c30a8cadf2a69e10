/* Copyright 2026 The MEGA-ABSA Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdlib>
#include <filesystem>
#include <initializer_list>
#include <optional>

namespace mega::test {

// First of `names` present under $MEGA_DATA_DIR. The SemEval-2014 files
// circulate under a few spellings.
inline std::optional<std::filesystem::path> official_file(std::initializer_list<const char*> names) {
  const char* dir = std::getenv("MEGA_DATA_DIR");
  if (!dir) return std::nullopt;
  for (const char* n : names) {
    const auto p = std::filesystem::path(dir) / n;
    if (std::filesystem::exists(p)) return p;
  }
  return std::nullopt;
}

inline std::optional<std::filesystem::path> restaurants_train() {
  return official_file({"Restaurants_Train_v2.xml", "Restaurants_Train.xml"});
}
inline std::optional<std::filesystem::path> restaurants_test() {
  return official_file({"Restaurants_Test_Gold.xml", "Restaurants_Test.xml"});
}
inline std::optional<std::filesystem::path> laptops_train() {
  return official_file({"Laptop_Train_v2.xml", "Laptops_Train_v2.xml", "Laptops_Train.xml"});
}
inline std::optional<std::filesystem::path> laptops_test() {
  return official_file({"Laptops_Test_Gold.xml", "Laptop_Test_Gold.xml", "Laptops_Test.xml"});
}

}  // namespace mega::test
