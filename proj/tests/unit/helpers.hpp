#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "skelgroup/dataset.hpp"

namespace testutil {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// K actors (the last `padding` of them invalid), T frames, N joints of
// random raw coordinates with confidences in [0.2, 1].
skelgroup::ClipRecord random_clip(std::mt19937_64& rng, std::size_t K, std::size_t T, std::size_t N,
                                  std::size_t padding = 0, std::size_t A = 0);

std::string read_file(const std::filesystem::path& path);

}  // namespace testutil
