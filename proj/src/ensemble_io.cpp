#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>

#include "errors.hpp"
#include "sde_engine.hpp"

namespace decoupler {

namespace {

static_assert(sizeof(double) == 8, "float64 required");

template <class T>
void put(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) fail(ErrorKind::Io, "truncated SDE1 file");
  return v;
}

}  // namespace

void write_ensemble_csv(const std::string& path, const std::vector<double>& data, int m) {
  require(m >= 1 && data.size() % m == 0, "write_ensemble_csv: bad shape");
  std::ofstream os(path);
  if (!os) fail(ErrorKind::Io, "cannot open " + path);
  for (int c = 0; c < m; ++c) os << (c ? "," : "") << "x" << c;
  os << "\n" << std::setprecision(17);
  for (std::size_t i = 0; i < data.size(); i += m) {
    for (int c = 0; c < m; ++c) os << (c ? "," : "") << data[i + c];
    os << "\n";
  }
}

void write_sde1(const std::string& path, const std::vector<double>& data, int m) {
  require(m >= 1 && data.size() % m == 0, "write_sde1: bad shape");
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorKind::Io, "cannot open " + path);
  os.write("SDE1", 4);
  put<std::uint32_t>(os, std::uint32_t(m));
  put<std::uint64_t>(os, std::uint64_t(data.size() / m));
  os.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size() * sizeof(double)));
}

std::vector<double> read_sde1(const std::string& path, int* m_out) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorKind::Io, "cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "SDE1", 4) != 0) fail(ErrorKind::Io, path + ": not an SDE1 file");
  const auto m = get<std::uint32_t>(is);
  const auto n = get<std::uint64_t>(is);
  std::vector<double> data(std::size_t(n) * m);
  is.read(reinterpret_cast<char*>(data.data()), std::streamsize(data.size() * sizeof(double)));
  if (!is) fail(ErrorKind::Io, "truncated SDE1 file");
  if (m_out) *m_out = int(m);
  return data;
}

}  // namespace decoupler
