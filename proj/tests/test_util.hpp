// Copyright 2026 The graphleak Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#ifndef GRAPHLEAK_TESTS_TEST_UTIL_HPP_
#define GRAPHLEAK_TESTS_TEST_UTIL_HPP_

#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "graphleak/graph.hpp"

namespace graphleak::testutil {

inline std::filesystem::path DataDir() { return GRAPHLEAK_DATA_DIR; }

/// Fresh empty directory under the gtest temp root.
inline std::filesystem::path TempDir(const std::string& name) {
  const std::filesystem::path p =
      std::filesystem::path(::testing::TempDir()) / ("graphleak_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

/// Cora with the default split, loaded once per process.
inline const AttributedGraph& Cora() {
  static const AttributedGraph g = LoadGraph(DataDir() / "cora", GraphFormat::kPlanetoidRaw);
  return g;
}

}  // namespace graphleak::testutil

#endif  // GRAPHLEAK_TESTS_TEST_UTIL_HPP_
