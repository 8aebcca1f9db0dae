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

#ifndef GRAPHLEAK_HASH_HPP_
#define GRAPHLEAK_HASH_HPP_

#include <filesystem>
#include <string>
#include <string_view>

#include "graphleak/tensor.hpp"

namespace graphleak {

/// Hex SHA-256 of raw bytes.
std::string Sha256Hex(std::string_view bytes);

/// Git-style blob hash: SHA-256 over "blob <size>\0" followed by the bytes.
std::string ContentHash(std::string_view bytes);

std::string FileContentHash(const std::filesystem::path& file);

/// Hash of a matrix's shape and raw values.
std::string MatrixHash(const Matrix& m);

}  // namespace graphleak

#endif  // GRAPHLEAK_HASH_HPP_
