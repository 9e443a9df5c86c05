#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "binori/error.hpp"
#include "binori/signal.hpp"

namespace binori {

namespace {

template <typename T>
void put_le(std::vector<char>& out, T v) {
  using U = std::make_unsigned_t<std::conditional_t<std::is_floating_point_v<T>, std::uint32_t, T>>;
  U u;
  if constexpr (std::is_floating_point_v<T>)
    u = std::bit_cast<std::uint32_t>(v);
  else
    u = static_cast<U>(v);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace

void write_wav(const std::string& path, const AudioBuffer& buf, WavFormat format) {
  const std::uint16_t bits = format == WavFormat::pcm16 ? 16 : 32;
  const std::uint16_t tag = format == WavFormat::pcm16 ? 1 : 3;
  const auto channels = static_cast<std::uint16_t>(buf.channels());
  const auto rate = static_cast<std::uint32_t>(std::lround(buf.sample_rate()));
  const auto data_bytes = static_cast<std::uint32_t>(buf.samples().size() * bits / 8);

  std::vector<char> out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_le<std::uint32_t>(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_le<std::uint32_t>(out, 16);
  put_le<std::uint16_t>(out, tag);
  put_le<std::uint16_t>(out, channels);
  put_le<std::uint32_t>(out, rate);
  put_le<std::uint32_t>(out, rate * channels * bits / 8);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(channels * bits / 8));
  put_le<std::uint16_t>(out, bits);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_le<std::uint32_t>(out, data_bytes);
  for (double v : buf.samples()) {
    if (format == WavFormat::pcm16) {
      const double clipped = std::clamp(v, -1.0, 1.0);
      put_le<std::uint16_t>(out, static_cast<std::uint16_t>(
                                     static_cast<std::int16_t>(std::lround(clipped * 32767.0))));
    } else {
      put_le<float>(out, static_cast<float>(v));
    }
  }
  std::ofstream f(path, std::ios::binary);
  require(f.good(), ErrorCode::io, "cannot open " + path + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  require(f.good(), ErrorCode::io, "failed writing " + path);
}

AudioBuffer read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrorCode::io, "cannot open " + path);
  std::vector<unsigned char> raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  require(raw.size() >= 12 && std::memcmp(raw.data(), "RIFF", 4) == 0 &&
              std::memcmp(raw.data() + 8, "WAVE", 4) == 0,
          ErrorCode::format, path + " is not a RIFF/WAVE file");

  std::uint16_t tag = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= raw.size()) {
    const unsigned char* chunk = raw.data() + pos;
    const std::size_t len = get_u32(chunk + 4);
    const std::size_t body = pos + 8;
    require(body + len <= raw.size(), ErrorCode::format, "truncated chunk in " + path);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      require(len >= 16, ErrorCode::format, "short fmt chunk");
      tag = get_u16(raw.data() + body);
      channels = get_u16(raw.data() + body + 2);
      rate = get_u32(raw.data() + body + 4);
      bits = get_u16(raw.data() + body + 14);
      if (tag == 0xFFFE && len >= 26) tag = get_u16(raw.data() + body + 24);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = raw.data() + body;
      data_len = len;
    }
    pos = body + len + (len & 1);
  }
  require(data != nullptr && channels > 0, ErrorCode::format, "missing fmt or data chunk in " + path);
  const bool pcm16 = tag == 1 && bits == 16;
  const bool f32 = tag == 3 && bits == 32;
  require(pcm16 || f32, ErrorCode::format, "only 16-bit PCM and 32-bit float WAV are supported");

  const std::size_t width = bits / 8;
  std::vector<double> samples(data_len / width);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const unsigned char* p = data + i * width;
    if (pcm16)
      samples[i] = static_cast<std::int16_t>(get_u16(p)) / 32767.0;
    else
      samples[i] = std::bit_cast<float>(get_u32(p));
  }
  samples.resize(samples.size() - samples.size() % channels);
  return AudioBuffer(std::move(samples), static_cast<double>(rate), channels);
}

}  // namespace binori
