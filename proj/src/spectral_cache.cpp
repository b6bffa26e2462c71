#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "islt/errors.hpp"
#include "islt/spectral.hpp"

namespace islt {

static_assert(std::endian::native == std::endian::little, "cache format assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'I', 'S', 'L', 'T', 'B', 'A', 'S', '2'};

void fnv(std::uint64_t& h, const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
}

template <class T>
void put(std::ofstream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
bool get(std::ifstream& is, T& v) {
  return static_cast<bool>(is.read(reinterpret_cast<char*>(&v), sizeof(T)));
}

}  // namespace

std::uint64_t basis_hash(const Grid& grid, int count) {
  std::uint64_t h = 14695981039346656037ULL;
  const std::int32_t d = grid.dim(), n = grid.n(), N = count;
  fnv(h, kMagic, sizeof(kMagic));
  fnv(h, &d, sizeof(d));
  fnv(h, &n, sizeof(n));
  fnv(h, &N, sizeof(N));
  for (int a = 0; a < d; ++a) {
    fnv(h, &grid.domain().lower[a], sizeof(double));
    fnv(h, &grid.domain().upper[a], sizeof(double));
  }
  return h;
}

void save_basis(const std::string& path, const SpectralBasis& basis) {
  const Grid& g = *basis.grid;
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw ValidationError("cannot write spectral cache: " + path);
    os.write(kMagic, sizeof(kMagic));
    put(os, static_cast<std::int32_t>(g.dim()));
    put(os, static_cast<std::int32_t>(g.n()));
    put(os, static_cast<std::int32_t>(basis.count()));
    put(os, basis_hash(g, basis.count()));
    for (double l : basis.eigenvalues) put(os, l);
    for (const auto& m : basis.modes)
      for (int c : m) put(os, static_cast<std::int32_t>(c));
    for (Eigen::Index i = 0; i < basis.fields.rows(); ++i)
      for (Eigen::Index q = 0; q < basis.fields.cols(); ++q) put(os, basis.fields(i, q));
    if (!os) throw ValidationError("failed writing spectral cache: " + path);
  }
  std::filesystem::rename(tmp, path);
}

std::optional<SpectralBasis> load_basis(const std::string& path, const GridPtr& grid, int count) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return std::nullopt;
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) return std::nullopt;
  std::int32_t d = 0, n = 0, N = 0;
  std::uint64_t h = 0;
  if (!get(is, d) || !get(is, n) || !get(is, N) || !get(is, h)) return std::nullopt;
  if (d != grid->dim() || n != grid->n() || N != count || h != basis_hash(*grid, count)) return std::nullopt;
  SpectralBasis b;
  b.grid = grid;
  b.eigenvalues.resize(N);
  for (auto& l : b.eigenvalues)
    if (!get(is, l)) return std::nullopt;
  b.modes.resize(N);
  for (auto& m : b.modes)
    for (int& c : m) {
      std::int32_t v = 0;
      if (!get(is, v)) return std::nullopt;
      c = v;
    }
  b.fields.resize(static_cast<Eigen::Index>(grid->num_nodes()), N);
  for (Eigen::Index i = 0; i < b.fields.rows(); ++i)
    for (Eigen::Index q = 0; q < N; ++q)
      if (!get(is, b.fields(i, q))) return std::nullopt;
  b.sup_norm = b.fields.cwiseAbs().maxCoeff();
  return b;
}

SpectralBasis cached_dirichlet_eigs(const std::string& cache_dir, const GridPtr& grid, int count,
                                    bool* cache_hit) {
  namespace fs = std::filesystem;
  char name[64];
  std::snprintf(name, sizeof(name), "basis-%016llx.bin",
                static_cast<unsigned long long>(basis_hash(*grid, count)));
  const fs::path path = fs::path(cache_dir) / name;
  if (auto b = load_basis(path.string(), grid, count)) {
    if (cache_hit) *cache_hit = true;
    return *b;
  }
  if (cache_hit) *cache_hit = false;
  SpectralBasis b = dirichlet_eigs(grid, count);
  fs::create_directories(cache_dir);
  save_basis(path.string(), b);
  return b;
}

}  // namespace islt
