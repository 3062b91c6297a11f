#pragma once

// Channel dump container. All integers are unsigned 32-bit and all floats
// IEEE-754 binary64, both little-endian regardless of host:
//
//   offset 0   8 bytes   magic "MUMIMOCH"
//              u32       format version (1)
//              u32       K, number of users
//              u32       T, transmit antennas
//   K times:   u32 R_k, u32 L_k, f64 path_loss_db
//   K times:   R_k*T entries, row-major, each as f64 re then f64 im
//
// One file holds one flat-fading channel realization.

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "mumimo/channel.hpp"

namespace mumimo::io {

inline constexpr std::array<char, 8> kDumpMagic{'M', 'U', 'M', 'I', 'M', 'O', 'C', 'H'};
inline constexpr std::uint32_t kDumpVersion = 1;

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t x) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((x >> (8 * i)) & 0xFFu);
  os.write(b, 4);
}

inline void put_f64(std::ostream& os, double x) {
  const auto bits = std::bit_cast<std::uint64_t>(x);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xFFu);
  os.write(b, 8);
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw Error(ErrorKind::Io, "channel dump truncated");
  std::uint32_t x = 0;
  for (int i = 0; i < 4; ++i) x |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return x;
}

inline double get_f64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw Error(ErrorKind::Io, "channel dump truncated");
  std::uint64_t x = 0;
  for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(x);
}

}  // namespace detail

inline void write_channel_dump(std::ostream& os, const ChannelSet& channels) {
  channels.validate();
  os.write(kDumpMagic.data(), kDumpMagic.size());
  detail::put_u32(os, kDumpVersion);
  detail::put_u32(os, static_cast<std::uint32_t>(channels.dims.num_users));
  detail::put_u32(os, static_cast<std::uint32_t>(channels.dims.tx_antennas));
  for (int k = 0; k < channels.dims.num_users; ++k) {
    detail::put_u32(os, static_cast<std::uint32_t>(channels.dims.rx(k)));
    detail::put_u32(os, static_cast<std::uint32_t>(channels.dims.layers_of(k)));
    detail::put_f64(os, channels.path_loss_db[static_cast<std::size_t>(k)]);
  }
  for (const auto& h : channels.per_user) {
    for (Index r = 0; r < h.rows(); ++r) {
      for (Index c = 0; c < h.cols(); ++c) {
        detail::put_f64(os, h(r, c).real());
        detail::put_f64(os, h(r, c).imag());
      }
    }
  }
  if (!os) throw Error(ErrorKind::Io, "failed writing channel dump");
}

inline ChannelSet read_channel_dump(std::istream& is) {
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kDumpMagic) {
    throw Error(ErrorKind::Io, "not a channel dump (bad magic)");
  }
  const auto version = detail::get_u32(is);
  if (version != kDumpVersion) throw Error(ErrorKind::Io, "unsupported channel dump version " + std::to_string(version));
  ChannelSet out;
  out.dims.num_users = static_cast<int>(detail::get_u32(is));
  out.dims.tx_antennas = static_cast<int>(detail::get_u32(is));
  if (out.dims.num_users < 1 || out.dims.num_users > 4096 || out.dims.tx_antennas < 1 ||
      out.dims.tx_antennas > 4096) {
    throw Error(ErrorKind::Io, "channel dump header has implausible dimensions");
  }
  for (int k = 0; k < out.dims.num_users; ++k) {
    out.dims.rx_antennas.push_back(static_cast<int>(detail::get_u32(is)));
    out.dims.layers.push_back(static_cast<int>(detail::get_u32(is)));
    out.path_loss_db.push_back(detail::get_f64(is));
  }
  try {
    out.dims.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::Io, std::string("channel dump: ") + e.what());
  }
  for (int k = 0; k < out.dims.num_users; ++k) {
    ComplexMatrix h(out.dims.rx(k), out.dims.tx_antennas);
    for (Index r = 0; r < h.rows(); ++r) {
      for (Index c = 0; c < h.cols(); ++c) {
        const double re = detail::get_f64(is);
        const double im = detail::get_f64(is);
        h(r, c) = Complex(re, im);
      }
    }
    out.per_user.push_back(std::move(h));
  }
  out.validate();
  return out;
}

inline void write_channel_dump(const std::string& path, const ChannelSet& channels) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::Io, "cannot open " + path + " for writing");
  write_channel_dump(os, channels);
}

inline ChannelSet read_channel_dump(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::Io, "cannot open " + path);
  return read_channel_dump(is);
}

}  // namespace mumimo::io
