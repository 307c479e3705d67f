/*
 * Copyright 2026 The secmap Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace secmap {

// Error hierarchy. Every error the library raises derives from Error so
// front ends can catch one type and still dispatch on the concrete kind.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class InfeasibleMapping : public Error {
 public:
  using Error::Error;
};

class InfeasibleLayer : public Error {
 public:
  using Error::Error;
};

class SimulationError : public Error {
 public:
  using Error::Error;
};

enum class TensorRole : uint8_t { kIfmap = 0, kWeight = 1, kOfmap = 2 };

inline constexpr std::array<TensorRole, 3> kAllRoles = {TensorRole::kIfmap, TensorRole::kWeight,
                                                         TensorRole::kOfmap};

inline constexpr std::size_t role_index(TensorRole r) { return static_cast<std::size_t>(r); }

std::string_view role_name(TensorRole r);
TensorRole role_from_name(std::string_view s);

// One value per scratchpad role, indexable by TensorRole.
template <typename T>
struct PerRole {
  std::array<T, 3> v{};

  T& operator[](TensorRole r) { return v[role_index(r)]; }
  const T& operator[](TensorRole r) const { return v[role_index(r)]; }
  bool operator==(const PerRole&) const = default;
};

// The seven loop-nest dimensions. X and Y here are *output* rows/cols when used
// as tiling dimensions (see LayerSpec::extent).
enum class Dim : uint8_t { K = 0, C, R, S, N, X, Y };

inline constexpr int kNumDims = 7;
inline constexpr std::array<Dim, kNumDims> kAllDims = {Dim::K, Dim::C, Dim::R, Dim::S,
                                                       Dim::N, Dim::X, Dim::Y};

inline constexpr std::size_t dim_index(Dim d) { return static_cast<std::size_t>(d); }
char dim_symbol(Dim d);
Dim dim_from_symbol(char c);

// Reduction dimensions accumulate into the same output element.
inline constexpr bool is_reduction(Dim d) { return d == Dim::C || d == Dim::R || d == Dim::S; }

inline constexpr int64_t ceil_div(int64_t a, int64_t b) { return (a + b - 1) / b; }

inline constexpr int64_t kLineBytes = 64;

}  // namespace secmap
