// Copyright 2026 The Stickergen Authors.
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


// Small corpora shared by the tests.

#pragma once

#include <filesystem>
#include <string>

#include "stickergen/corpus.hpp"

namespace stickergen::testing {

inline Corpus tiny_corpus() {
  return Corpus({
      {"s0", "hello today", "kapa miro", "cat", "cute", "so happy"},
      {"s1", "super sad now", "kapa miro", "dog", "cute", "feeling sad"},
      {"s2", "", "tebu lona", "dog", "retro", "sad mood"},
      {"s3", "hello haha", "tebu lona", "owl", "pixel art", "so happy"},
      {"s4", "goodnight today", "zuli pabo", "cat", "retro", "sleepy vibes"},
      {"s5", "thanks haha", "zuli pabo", "fox", "cute", "feeling thanks"},
  });
}

inline SyntheticConfig small_synthetic_config(std::size_t stickers, std::uint64_t seed) {
  SyntheticConfig c;
  c.num_stickers = stickers;
  c.num_ips = 16;
  c.num_entities = 12;
  c.num_styles = 6;
  c.num_emotions = 12;
  c.num_train_pairs = 64;
  c.num_test_pairs = 16;
  c.logs_per_group = 16;
  c.seed = seed;
  return c;
}

inline std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("stickergen_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace stickergen::testing
