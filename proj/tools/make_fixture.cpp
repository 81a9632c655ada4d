// Copyright 2026 The camret Authors.
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

// Writes a planted synthetic dataset pair for trying the CLI end to end:
//   make_fixture <dir>   ->  <dir>/a (search set), <dir>/b (PCA set)

#include <filesystem>
#include <iostream>

#include "fixture.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixture <output-dir>\n";
    return 2;
  }
  const std::filesystem::path root = argv[1];
  camret::testing::FixtureOptions a;
  camret::testing::FixtureOptions b;
  b.seed = 99;
  b.dataset = "synthetic-b";
  camret::testing::WriteFixture(camret::testing::MakeFixture(a), root / "a");
  camret::testing::WriteFixture(camret::testing::MakeFixture(b), root / "b");
  std::cout << "wrote " << (root / "a").string() << " and " << (root / "b").string() << "\n";
  return 0;
}
