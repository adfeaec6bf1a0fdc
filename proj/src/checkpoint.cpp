#include "mtt/agents.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

namespace mtt
{

namespace
{

constexpr char kMagic[8] = {'M', 'T', 'T', 'Q', 'N', 'E', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, T v)
{
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::string& path)
{
  unsigned char bytes[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw std::runtime_error(path + ": truncated checkpoint");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Net& net)
{
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error(path + ": cannot open for writing");
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, kVersion);
  put<std::uint32_t>(os, net.use_bias() ? 1u : 0u);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(net.sizes().size()));
  for (int s : net.sizes()) put<std::uint32_t>(os, static_cast<std::uint32_t>(s));
  for (std::size_t l = 0; l < net.layers(); ++l) {
    const auto& w = net.weight(l);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) put<double>(os, w(r, c));
    const auto& b = net.bias(l);
    for (Eigen::Index r = 0; r < b.size(); ++r) put<double>(os, b(r));
  }
  if (!os) throw std::runtime_error(path + ": write failed");
}

Net load_checkpoint(const std::string& path)
{
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error(path + ": cannot open checkpoint");
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error(path + ": not a network checkpoint");
  const auto version = get<std::uint32_t>(is, path);
  if (version != kVersion) throw std::runtime_error(path + ": unsupported checkpoint version " + std::to_string(version));
  const bool bias = get<std::uint32_t>(is, path) != 0;
  const auto count = get<std::uint32_t>(is, path);
  if (count < 2 || count > 64) throw std::runtime_error(path + ": bad layer count");
  std::vector<int> sizes;
  for (std::uint32_t i = 0; i < count; ++i) sizes.push_back(static_cast<int>(get<std::uint32_t>(is, path)));
  Net net(sizes, bias);
  for (std::size_t l = 0; l < net.layers(); ++l) {
    auto& w = net.weight(l);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = get<double>(is, path);
    auto& b = net.bias(l);
    for (Eigen::Index r = 0; r < b.size(); ++r) b(r) = get<double>(is, path);
  }
  return net;
}

}  // namespace mtt
