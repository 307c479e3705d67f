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

#include <random>

#include "secmap/parallel.hpp"
#include "secmap/simulator.hpp"

namespace secmap {

namespace {

void check_shapes(const ModelSpec& model, const ModelData& data) {
  validate_model(model);
  if (data.weights.size() != model.size() || data.ifmaps.size() != model.size())
    throw ValidationError("model data: need one weight and one ifmap slot per layer");
  for (std::size_t i = 0; i < model.size(); ++i) {
    const auto& l = model.layers[i];
    if (static_cast<int64_t>(data.weights[i].size()) != l.weight_elements())
      throw ValidationError("layer '" + l.name + "': weight size mismatch");
    if (model.depends_on[i] == kExternalInput &&
        static_cast<int64_t>(data.ifmaps[i].size()) != l.ifmap_elements())
      throw ValidationError("layer '" + l.name + "': ifmap size mismatch");
  }
}

// Fills output plane (n, k).
void conv_plane(const LayerSpec& l, const int32_t* in, const int32_t* w, int32_t* out, int64_t n,
                int64_t k) {
  const int64_t ox = l.out_x();
  const int64_t oy = l.out_y();
  for (int64_t x = 0; x < ox; ++x) {
    for (int64_t y = 0; y < oy; ++y) {
      uint64_t acc = 0;
      for (int64_t c = 0; c < l.C; ++c)
        for (int64_t r = 0; r < l.R; ++r)
          for (int64_t s = 0; s < l.S; ++s) {
            int64_t a = in[((n * l.C + c) * l.X + x * l.stride + r) * l.Y + y * l.stride + s];
            int64_t b = w[((k * l.C + c) * l.R + r) * l.S + s];
            acc += static_cast<uint64_t>(a * b);
          }
      out[((n * l.K + k) * ox + x) * oy + y] = static_cast<int32_t>(static_cast<uint32_t>(acc));
    }
  }
}

std::vector<std::vector<int32_t>> run(const ModelSpec& model, const ModelData& data, bool parallel) {
  check_shapes(model, data);
  std::vector<std::vector<int32_t>> out(model.size());
  for (std::size_t i = 0; i < model.size(); ++i) {
    const auto& l = model.layers[i];
    const std::vector<int32_t>& in = model.depends_on[i] == kExternalInput
                                         ? data.ifmaps[i]
                                         : out[static_cast<std::size_t>(model.depends_on[i])];
    out[i].assign(static_cast<std::size_t>(l.ofmap_elements()), 0);
    const int64_t planes = l.N * l.K;
    const int32_t* inp = in.data();
    const int32_t* wp = data.weights[i].data();
    int32_t* op = out[i].data();
#pragma omp parallel for schedule(static) num_threads(worker_count()) if (parallel)
    for (int64_t p = 0; p < planes; ++p) conv_plane(l, inp, wp, op, p / l.K, p % l.K);
  }
  return out;
}

}  // namespace

ModelData random_model_data(const ModelSpec& model, uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto draw = [&] { return static_cast<int32_t>(rng() % 15) - 7; };
  ModelData d;
  d.ifmaps.resize(model.size());
  d.weights.resize(model.size());
  for (std::size_t i = 0; i < model.size(); ++i) {
    const auto& l = model.layers[i];
    if (model.depends_on[i] == kExternalInput) {
      d.ifmaps[i].resize(static_cast<std::size_t>(l.ifmap_elements()));
      for (auto& v : d.ifmaps[i]) v = draw();
    }
    d.weights[i].resize(static_cast<std::size_t>(l.weight_elements()));
    for (auto& v : d.weights[i]) v = draw();
  }
  return d;
}

std::vector<std::vector<int32_t>> golden_execute(const ModelSpec& model, const ModelData& data) {
  return run(model, data, true);
}

std::vector<std::vector<int32_t>> golden_execute_serial(const ModelSpec& model,
                                                        const ModelData& data) {
  return run(model, data, false);
}

}  // namespace secmap
