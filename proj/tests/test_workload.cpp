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

#include "doctest.h"

#include "secmap/workload.hpp"

using namespace secmap;

TEST_CASE("parse_model accepts a single conv layer") {
  auto m = parse_model_text(
      R"({"layers":[{"name":"c","K":64,"C":3,"R":3,"S":3,"X":8,"Y":8,"N":1,"stride":1}]})");
  REQUIRE(m.size() == 1);
  CHECK(m.layers[0].K == 64);
  CHECK(m.depends_on[0] == kExternalInput);
  CHECK(parse_model_text(serialize_model(m)) == m);
}

TEST_CASE("parse_model rejects bad input") {
  CHECK_THROWS_AS(parse_model_text(R"({"layers":[]})"), ValidationError);
  CHECK_THROWS_AS(parse_model_text(R"({"layers":[{"K":1,"C":1,"R":1,"S":1,"X":4,"Y":4,"stride":0}]})"),
                  ValidationError);
  CHECK_THROWS_AS(parse_model_text("{not json"), ParseError);
  CHECK_THROWS_AS(parse_model_text(R"({"layers":[{"K":1,"C":1,"R":1,"S":1,"X":4}]})"), ParseError);
  CHECK_THROWS_AS(parse_model_text(R"({"layers":[{"K":"a","C":1,"R":1,"S":1,"X":4,"Y":4}]})"),
                  ParseError);
  CHECK_THROWS_AS(parse_model_text(R"({"layers":[{"K":1,"C":1,"R":5,"S":1,"X":4,"Y":4}]})"),
                  ValidationError);
  try {
    parse_model_text(R"({"layers":[{"K":1,"C":1,"R":1,"S":1,"X":4}]})");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find(".Y") != std::string::npos);
  }
}

TEST_CASE("consumer shape must match its producer") {
  CHECK_THROWS_AS(parse_model_text(R"({"layers":[
      {"K":4,"C":1,"R":1,"S":1,"X":4,"Y":4},
      {"K":4,"C":3,"R":1,"S":1,"X":4,"Y":4}]})"),
                  ValidationError);
  auto ok = parse_model_text(R"({"layers":[
      {"K":4,"C":1,"R":1,"S":1,"X":4,"Y":4},
      {"K":2,"C":4,"R":3,"S":3,"X":4,"Y":4}]})");
  CHECK(ok.depends_on[1] == 0);
}

TEST_CASE("output_dims") {
  LayerSpec l;
  l.X = l.Y = 8;
  l.R = l.S = 3;
  CHECK(output_dims(l) == std::pair<int64_t, int64_t>{6, 6});
  l.R = l.S = 1;
  CHECK(output_dims(l) == std::pair<int64_t, int64_t>{8, 8});
  l.X = l.Y = 7;
  l.R = l.S = 3;
  l.stride = 2;
  CHECK(output_dims(l) == std::pair<int64_t, int64_t>{3, 3});
}

TEST_CASE("output_dims is non-increasing in stride") {
  LayerSpec l;
  l.X = 13;
  l.Y = 9;
  l.R = 3;
  l.S = 2;
  int64_t px = l.X, py = l.Y;
  for (int64_t s = 1; s <= 6; ++s) {
    l.stride = s;
    auto [x, y] = output_dims(l);
    CHECK(x <= px);
    CHECK(y <= py);
    px = x;
    py = y;
  }
}

TEST_CASE("derive_gemm") {
  LayerSpec l;
  l.K = 64;
  l.C = 3;
  l.R = l.S = 3;
  l.X = l.Y = 8;
  CHECK(derive_gemm(l) == GemmShape{36, 27, 64});
  LayerSpec one;
  CHECK(derive_gemm(one) == GemmShape{1, 1, 1});
  LayerSpec fc;
  fc.K = 10;
  fc.C = 20;
  fc.N = 3;
  CHECK(derive_gemm(fc) == GemmShape{3, 20, 10});
  for (int k = 1; k < 5; ++k) {
    l.K = k;
    l.N = k + 1;
    auto g = derive_gemm(l);
    CHECK(g.M * g.Ncols == l.ofmap_elements());
  }
}
