#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>

#include "skelgroup/error.hpp"
#include "skelgroup/params.hpp"

namespace skelgroup {

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.params.parameter_count();
  return n;
}

ParamStore ParamStore::zeros_like() const {
  ParamStore out;
  out.layers.reserve(layers.size());
  for (const auto& l : layers) out.layers.push_back({l.name, l.params.zeros_like()});
  return out;
}

LayerParams& ParamStore::at(std::string_view name) {
  for (auto& l : layers) {
    if (l.name == name) return l.params;
  }
  throw ConfigError("no layer named " + std::string(name));
}

const LayerParams& ParamStore::at(std::string_view name) const {
  return const_cast<ParamStore*>(this)->at(name);
}

bool ParamStore::same_layout(const ParamStore& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& a = layers[i];
    const auto& b = other.layers[i];
    if (a.name != b.name || a.params.weight.shape() != b.params.weight.shape() ||
        a.params.bias.shape() != b.params.bias.shape()) {
      return false;
    }
  }
  return true;
}

bool ParamStore::all_finite() const {
  return std::all_of(layers.begin(), layers.end(),
                     [](const auto& l) { return l.params.weight.all_finite() && l.params.bias.all_finite(); });
}

void ParamStore::set_zero() {
  for (auto& l : layers) {
    l.params.weight.fill(0.0);
    l.params.bias.fill(0.0);
  }
}

ParamStore& ParamStore::operator+=(const ParamStore& other) {
  if (!same_layout(other)) throw ConfigError("parameter stores differ in layout");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].params.weight += other.layers[i].params.weight;
    layers[i].params.bias += other.layers[i].params.bias;
  }
  return *this;
}

ParamStore& ParamStore::operator*=(double scale) {
  for (auto& l : layers) {
    l.params.weight *= scale;
    l.params.bias *= scale;
  }
  return *this;
}

std::vector<double> ParamStore::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto& l : layers) {
    out.insert(out.end(), l.params.weight.values().begin(), l.params.weight.values().end());
    out.insert(out.end(), l.params.bias.values().begin(), l.params.bias.values().end());
  }
  return out;
}

void ParamStore::unflatten(const std::vector<double>& values) {
  if (values.size() != parameter_count()) throw ConfigError("unflatten: wrong number of values");
  std::size_t pos = 0;
  for (auto& l : layers) {
    for (double& v : l.params.weight.values()) v = values[pos++];
    for (double& v : l.params.bias.values()) v = values[pos++];
  }
}

namespace {

constexpr char kMagic[8] = {'S', 'K', 'G', 'C', 'K', 'P', 'T', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in, const std::filesystem::path& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw IoError("truncated checkpoint " + path.string());
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_tensor(std::ostream& out, const std::string& name, const Tensor& t) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
  for (double v : t.values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

}  // namespace

void write_checkpoint(const ParamStore& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  put_u32(out, static_cast<std::uint32_t>(2 * params.layers.size()));
  for (const auto& l : params.layers) {
    put_tensor(out, l.name + ".weight", l.params.weight);
    put_tensor(out, l.name + ".bias", l.params.bias);
  }
  if (!out) throw IoError("write failed for " + path.string());
}

ParamStore read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("path not found: " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || !std::equal(magic, magic + 8, kMagic)) {
    throw IoError("not a checkpoint file: " + path.string());
  }
  const std::uint32_t count = get_u32(in, path);
  if (count % 2 != 0) throw IoError("checkpoint " + path.string() + " has an odd tensor count");
  ParamStore store;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = get_u32(in, path);
    if (len > 4096) throw IoError("checkpoint " + path.string() + ": implausible name length");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw IoError("truncated checkpoint " + path.string());
    const std::uint32_t rank = get_u32(in, path);
    if (rank > 8) throw IoError("checkpoint " + path.string() + ": implausible rank");
    Shape shape(rank);
    for (auto& d : shape) d = get_u32(in, path);
    Tensor t(shape);
    for (double& v : t.values()) v = static_cast<double>(std::bit_cast<float>(get_u32(in, path)));

    const bool is_weight = name.ends_with(".weight");
    const bool is_bias = name.ends_with(".bias");
    if (is_weight == is_bias) throw IoError("checkpoint tensor " + name + " is neither .weight nor .bias");
    const std::string layer = name.substr(0, name.size() - (is_weight ? 7 : 5));
    if (is_weight) {
      store.layers.push_back({layer, LayerParams{std::move(t), Tensor()}});
    } else {
      if (store.layers.empty() || store.layers.back().name != layer) {
        throw IoError("checkpoint bias " + name + " does not follow its weight");
      }
      store.layers.back().params.bias = std::move(t);
    }
  }
  return store;
}

}  // namespace skelgroup
