#include "trialnet/param_store.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace trialnet {

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'H', 'I', 'N', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
bool read_pod(std::istream& is, T& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return static_cast<bool>(is);
}

}  // namespace

TensorPtr ParameterStore::create(const std::string& path, Shape shape,
                                 Init init, std::size_t fan_in_override) {
  if (params_.count(path))
    throw std::invalid_argument("parameter already exists: " + path);
  auto t = zeros(std::move(shape), true);
  if (init == Init::kUniformFanIn) {
    std::size_t fan_in = fan_in_override;
    if (fan_in == 0) fan_in = t->shape.back();
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Rng rng(seed_ ^ fnv1a64(path));
    for (double& v : t->values) v = rng.uniform(-bound, bound);
  }
  params_.emplace(path, t);
  return t;
}

TensorPtr ParameterStore::at(const std::string& path) const {
  auto it = params_.find(path);
  if (it == params_.end())
    throw std::invalid_argument("unknown parameter: " + path);
  return it->second;
}

bool ParameterStore::has(const std::string& path) const {
  return params_.count(path) > 0;
}

void ParameterStore::zero_grad() {
  for (auto& [path, t] : params_) {
    t->grad.assign(t->size(), 0.0);
  }
}

std::size_t ParameterStore::total_values() const {
  std::size_t n = 0;
  for (const auto& [path, t] : params_) n += t->size();
  return n;
}

void ParameterStore::save(
    const std::filesystem::path& file,
    const std::function<bool(const std::string&)>& filter) const {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + file.string());
  os.write(kMagic, sizeof(kMagic));
  write_pod(os, kFormatVersion);
  for (const auto& [path, t] : params_) {
    if (filter && !filter(path)) continue;
    write_pod(os, static_cast<std::uint32_t>(path.size()));
    os.write(path.data(), static_cast<std::streamsize>(path.size()));
    write_pod(os, static_cast<std::uint32_t>(t->shape.size()));
    for (std::size_t d : t->shape) write_pod(os, static_cast<std::uint64_t>(d));
    os.write(reinterpret_cast<const char*>(t->values.data()),
             static_cast<std::streamsize>(t->values.size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("write failed: " + file.string());
}

ParameterStore ParameterStore::load_file(const std::filesystem::path& file,
                                         std::uint64_t seed) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + file.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("bad checkpoint magic in " + file.string());
  std::uint32_t version = 0;
  if (!read_pod(is, version) || version != kFormatVersion)
    throw std::runtime_error("unsupported checkpoint version in " +
                             file.string());
  ParameterStore store(seed);
  for (;;) {
    std::uint32_t path_len = 0;
    if (!read_pod(is, path_len)) break;  // clean EOF
    std::string path(path_len, '\0');
    is.read(path.data(), path_len);
    std::uint32_t rank = 0;
    if (!read_pod(is, rank) || rank == 0)
      throw std::runtime_error("truncated checkpoint: " + file.string());
    Shape shape(rank);
    for (auto& d : shape) {
      std::uint64_t v = 0;
      if (!read_pod(is, v))
        throw std::runtime_error("truncated checkpoint: " + file.string());
      d = static_cast<std::size_t>(v);
    }
    auto t = zeros(shape, true);
    is.read(reinterpret_cast<char*>(t->values.data()),
            static_cast<std::streamsize>(t->values.size() * sizeof(double)));
    if (!is) throw std::runtime_error("truncated checkpoint: " + file.string());
    if (store.params_.count(path))
      throw std::runtime_error("duplicate parameter in checkpoint: " + path);
    store.params_.emplace(path, t);
  }
  return store;
}

std::size_t ParameterStore::overlay(
    const ParameterStore& other,
    const std::vector<std::string>& allow_row_resize) {
  std::size_t copied = 0;
  for (auto& [path, t] : params_) {
    auto it = other.params_.find(path);
    if (it == other.params_.end()) continue;
    const TensorPtr& src = it->second;
    if (src->shape == t->shape) {
      t->values = src->values;
      ++copied;
      continue;
    }
    const bool resizable =
        std::find(allow_row_resize.begin(), allow_row_resize.end(), path) !=
        allow_row_resize.end();
    if (resizable && t->rank() == 2 && src->rank() == 2 &&
        t->cols() == src->cols()) {
      const std::size_t rows = std::min(t->rows(), src->rows());
      std::copy_n(src->values.begin(), rows * t->cols(), t->values.begin());
      ++copied;
      continue;
    }
    throw std::runtime_error("shape mismatch while loading parameter " + path +
                             ": " + shape_str(t->shape) + " vs " +
                             shape_str(src->shape));
  }
  return copied;
}

}  // namespace trialnet
