#include "helpers.hpp"

#include <atomic>
#include <fstream>
#include <sstream>

#include <unistd.h>

namespace testutil {

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("skelgroup_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

skelgroup::ClipRecord random_clip(std::mt19937_64& rng, std::size_t K, std::size_t T, std::size_t N,
                                  std::size_t padding, std::size_t A) {
  std::uniform_real_distribution<double> coord(-5.0, 5.0);
  std::uniform_real_distribution<double> conf(0.2, 1.0);
  skelgroup::ClipRecord clip;
  clip.clip_id = "r" + std::to_string(rng() % 1000000);
  clip.actors.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    auto& actor = clip.actors[k];
    actor.valid = k + padding < K;
    actor.frames.assign(T, skelgroup::SkeletonFrame(N));
    if (!actor.valid) continue;
    const double ox = coord(rng) * 4.0;
    const double oy = coord(rng) * 4.0;
    for (auto& frame : actor.frames) {
      for (auto& j : frame) j = {ox + coord(rng), oy + coord(rng), conf(rng)};
    }
  }
  if (A > 0) {
    for (std::size_t k = 0; k < K; ++k) {
      clip.action_labels.push_back(clip.actors[k].valid ? static_cast<int>(rng() % A) : skelgroup::kNoLabel);
    }
  }
  return clip;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace testutil
