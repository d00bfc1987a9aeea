#include "fscil/binary_io.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include "fscil/error.hpp"

namespace fscil {

void ByteWriter::put(std::uint64_t v, int width) {
  for (int i = 0; i < width; ++i) {
    buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

void ByteWriter::magic(std::string_view tag) {
  for (char ch : tag) buf_.push_back(static_cast<std::uint8_t>(ch));
}
void ByteWriter::u8(std::uint8_t v) { put(v, 1); }
void ByteWriter::u16(std::uint16_t v) { put(v, 2); }
void ByteWriter::u32(std::uint32_t v) { put(v, 4); }
void ByteWriter::f32(float v) { put(std::bit_cast<std::uint32_t>(v), 4); }
void ByteWriter::f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }

std::uint64_t ByteReader::take(int width) {
  if (remaining() < static_cast<std::size_t>(width)) {
    throw FormatError("truncated input at byte offset " + std::to_string(pos_));
  }
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) {
    v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
  }
  pos_ += width;
  return v;
}

void ByteReader::expect_magic(std::string_view tag) {
  const std::size_t at = pos_;
  for (char ch : tag) {
    if (take(1) != static_cast<std::uint8_t>(ch)) {
      throw FormatError("bad magic at byte offset " + std::to_string(at) +
                        ", expected \"" + std::string(tag) + "\"");
    }
  }
}

std::uint8_t ByteReader::u8() { return static_cast<std::uint8_t>(take(1)); }
std::uint16_t ByteReader::u16() { return static_cast<std::uint16_t>(take(2)); }
std::uint32_t ByteReader::u32() { return static_cast<std::uint32_t>(take(4)); }
float ByteReader::f32() { return std::bit_cast<float>(static_cast<std::uint32_t>(take(4))); }
double ByteReader::f64() { return std::bit_cast<double>(take(8)); }

void ByteReader::expect_end() const {
  if (remaining() != 0) {
    throw FormatError("trailing bytes at byte offset " + std::to_string(pos_));
  }
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace fscil
