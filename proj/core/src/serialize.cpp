#include "papnf/serialize.hpp"

#include <openssl/evp.h>
#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "papnf/errors.hpp"

namespace papnf {

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw ParseError(std::string("checkpoint: truncated while reading ") + what);
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_tensors(std::span<const NamedTensor> tensors) {
  std::vector<std::uint8_t> body;
  for (const auto& [name, tensor] : tensors) {
    put<std::uint32_t>(body, static_cast<std::uint32_t>(name.size()));
    body.insert(body.end(), name.begin(), name.end());
    put<std::uint32_t>(body, static_cast<std::uint32_t>(tensor.rank()));
    for (std::size_t d : tensor.shape()) put<std::uint64_t>(body, d);
    for (double v : tensor.data()) put<double>(body, v);
  }
  return body;
}

std::vector<std::uint8_t> encode_container(const std::string& header,
                                           std::span<const NamedTensor> tensors) {
  std::vector<std::uint8_t> out(std::begin(kContainerMagic), std::end(kContainerMagic));
  put<std::uint64_t>(out, header.size());
  out.insert(out.end(), header.begin(), header.end());
  const auto body = encode_tensors(tensors);
  out.insert(out.end(), body.begin(), body.end());
  put<std::uint32_t>(out, crc32(body));
  return out;
}

Container decode_container(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t kMagic = sizeof kContainerMagic;
  if (bytes.size() < kMagic + 8 + 4 || std::memcmp(bytes.data(), kContainerMagic, kMagic) != 0) {
    throw ParseError("checkpoint: bad magic bytes (not a PAPNF1 container)");
  }
  Reader head(bytes.subspan(kMagic));
  const auto header_len = head.get<std::uint64_t>("header length");
  if (header_len > bytes.size()) throw ParseError("checkpoint: header length exceeds file size");
  auto header_bytes = head.take(static_cast<std::size_t>(header_len), "header");

  const std::size_t body_start = kMagic + 8 + static_cast<std::size_t>(header_len);
  if (bytes.size() < body_start + 4) throw ParseError("checkpoint: truncated before CRC trailer");
  auto body = bytes.subspan(body_start, bytes.size() - body_start - 4);
  std::uint32_t stored = 0;
  std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
  if (stored != crc32(body)) throw ParseError("checkpoint: CRC-32 mismatch (corrupt file)");

  Container c;
  c.header.assign(header_bytes.begin(), header_bytes.end());
  Reader r(body);
  while (!r.done()) {
    const auto name_len = r.get<std::uint32_t>("tensor name length");
    auto name = r.take(name_len, "tensor name");
    const auto rank = r.get<std::uint32_t>("tensor rank");
    if (rank > 8) throw ParseError("checkpoint: implausible tensor rank " + std::to_string(rank));
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(r.get<std::uint64_t>("tensor dims"));
    const std::size_t n = shape_numel(shape);
    auto raw = r.take(n * sizeof(double), "tensor values");
    std::vector<double> values(n);
    if (n > 0) std::memcpy(values.data(), raw.data(), n * sizeof(double));
    c.tensors.push_back({std::string(name.begin(), name.end()), Tensor::from(std::move(shape), std::move(values))});
  }
  return c;
}

void write_container(const std::filesystem::path& path, const std::string& header,
                     std::span<const NamedTensor> tensors) {
  const auto bytes = encode_container(header, tensors);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

Container read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("checkpoint: cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_container(bytes);
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for large bodies
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const std::size_t chunk = std::min<std::size_t>(bytes.size() - pos, 1u << 30);
    crc = ::crc32(crc, bytes.data() + pos, static_cast<uInt>(chunk));
    pos += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256: digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    hex.push_back(kHex[digest[i] >> 4]);
    hex.push_back(kHex[digest[i] & 0xf]);
  }
  return hex;
}

std::string sha256_hex(const std::string& text) {
  return sha256_hex(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string tensors_sha256(std::span<const NamedTensor> tensors) {
  return sha256_hex(encode_tensors(tensors));
}

}  // namespace papnf
