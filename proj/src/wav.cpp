#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "castkit/audio.hpp"
#include "castkit/error.hpp"

namespace castkit {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t le32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}
std::uint16_t le16(const std::uint8_t* p) { return std::uint16_t(p[0] | p[1] << 8); }

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

struct FormatChunk {
  std::uint16_t tag = 0;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t bits = 0;
  std::uint16_t block_align = 0;
};

}  // namespace

AudioBuffer decode_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw ParseError("not a RIFF/WAVE file");

  FormatChunk fmt;
  bool have_fmt = false;
  std::span<const std::uint8_t> data;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* hdr = bytes.data() + pos;
    const std::uint32_t size = le32(hdr + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (size < 16 || body + size > bytes.size()) throw ParseError("truncated fmt chunk");
      const std::uint8_t* f = bytes.data() + body;
      fmt.tag = le16(f);
      fmt.channels = le16(f + 2);
      fmt.rate = le32(f + 4);
      fmt.block_align = le16(f + 12);
      fmt.bits = le16(f + 14);
      if (fmt.tag == kFormatExtensible) {
        if (size < 40) throw ParseError("truncated WAVE_FORMAT_EXTENSIBLE header");
        fmt.tag = le16(f + 24);  // first two bytes of the subformat GUID
      }
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      if (body + size > bytes.size()) throw ParseError("truncated data chunk");
      data = bytes.subspan(body, size);
      have_data = true;
      break;
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt) throw ParseError("missing fmt chunk");
  if (!have_data) throw ParseError("missing data chunk");

  const bool is_int = fmt.tag == kFormatPcm && (fmt.bits == 16 || fmt.bits == 24 || fmt.bits == 32);
  const bool is_float = fmt.tag == kFormatFloat && fmt.bits == 32;
  if (!is_int && !is_float)
    throw ParseError("unsupported codec: format tag " + std::to_string(fmt.tag) + ", " +
                     std::to_string(fmt.bits) + " bits");
  if (fmt.channels < 1 || fmt.channels > 2)
    throw ParseError("unsupported channel count " + std::to_string(fmt.channels));
  if (fmt.rate == 0) throw ParseError("zero sample rate");

  const std::size_t width = fmt.bits / 8;
  const std::size_t frame_bytes = width * fmt.channels;
  const std::size_t frames = data.size() / frame_bytes;
  if (frames == 0) throw ParseError("zero-length audio");

  std::vector<std::vector<float>> channels(fmt.channels, std::vector<float>(frames));
  const double scale = 1.0 / std::ldexp(1.0, fmt.bits - 1);
  for (std::size_t i = 0; i < frames; ++i) {
    for (std::size_t c = 0; c < fmt.channels; ++c) {
      const std::uint8_t* p = data.data() + i * frame_bytes + c * width;
      float v = 0.0f;
      if (is_float) {
        std::uint32_t bits = le32(p);
        std::memcpy(&v, &bits, sizeof v);
      } else if (fmt.bits == 16) {
        v = static_cast<float>(static_cast<std::int16_t>(le16(p)) * scale);
      } else if (fmt.bits == 24) {
        std::int32_t s = std::int32_t(p[0]) | std::int32_t(p[1]) << 8 | std::int32_t(p[2]) << 16;
        if (s & 0x800000) s -= 0x1000000;
        v = static_cast<float>(s * scale);
      } else {
        v = static_cast<float>(static_cast<std::int32_t>(le32(p)) * scale);
      }
      channels[c][i] = v;
    }
  }
  return AudioBuffer(std::move(channels), static_cast<int>(fmt.rate));
}

AudioBuffer decode_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_wav(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_wav(const AudioBuffer& buffer, SampleFormat format) {
  int bits = 16;
  std::uint16_t tag = kFormatPcm;
  switch (format) {
    case SampleFormat::Pcm16: bits = 16; break;
    case SampleFormat::Pcm24: bits = 24; break;
    case SampleFormat::Pcm32: bits = 32; break;
    case SampleFormat::Float32: bits = 32; tag = kFormatFloat; break;
  }
  const std::size_t width = bits / 8;
  const auto channels = static_cast<std::uint16_t>(buffer.channel_count());
  const std::size_t data_bytes = buffer.frames() * channels * width;

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put32(out, static_cast<std::uint32_t>(36 + data_bytes));
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put32(out, 16);
  put16(out, tag);
  put16(out, channels);
  put32(out, static_cast<std::uint32_t>(buffer.sample_rate()));
  put32(out, static_cast<std::uint32_t>(buffer.sample_rate() * channels * width));
  put16(out, static_cast<std::uint16_t>(channels * width));
  put16(out, static_cast<std::uint16_t>(bits));
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put32(out, static_cast<std::uint32_t>(data_bytes));

  const double full = std::ldexp(1.0, bits - 1);
  for (std::size_t i = 0; i < buffer.frames(); ++i) {
    for (int c = 0; c < channels; ++c) {
      const float v = buffer.channel(c)[i];
      if (tag == kFormatFloat) {
        std::uint32_t raw;
        std::memcpy(&raw, &v, sizeof raw);
        put32(out, raw);
        continue;
      }
      const double q = std::clamp(std::round(static_cast<double>(v) * full), -full, full - 1.0);
      const auto s = static_cast<std::int64_t>(q);
      for (std::size_t b = 0; b < width; ++b) out.push_back(static_cast<std::uint8_t>(s >> (8 * b)));
    }
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const AudioBuffer& buffer, SampleFormat format) {
  const auto bytes = encode_wav(buffer, format);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace castkit
