// Copyright 2026 The spikefirst Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SPIKEFIRST_TESTS_DATA_PATHS_HPP_
#define SPIKEFIRST_TESTS_DATA_PATHS_HPP_

#include <cstdlib>
#include <filesystem>

namespace testdata {

// MNIST directory: $SPIKEFIRST_DATA, $SPIKEFIRST_DATA/mnist, or /root/data/mnist.
inline std::filesystem::path mnist_dir() {
  namespace fs = std::filesystem;
  if (const char* env = std::getenv("SPIKEFIRST_DATA")) {
    if (fs::exists(fs::path(env) / "train-images-idx3-ubyte")) return env;
    if (fs::exists(fs::path(env) / "mnist" / "train-images-idx3-ubyte")) return fs::path(env) / "mnist";
  }
  return "/root/data/mnist";
}

inline bool have_mnist() { return std::filesystem::exists(mnist_dir() / "t10k-images-idx3-ubyte"); }

}  // namespace testdata

#endif  // SPIKEFIRST_TESTS_DATA_PATHS_HPP_
