#include "debias/zip.hpp"

#include <zlib.h>

#include "debias/errors.hpp"

namespace debias::zip {

namespace {

constexpr std::uint32_t kLocalSig = 0x04034b50;
constexpr std::uint32_t kCentralSig = 0x02014b50;
constexpr std::uint32_t kEndSig = 0x06054b50;

std::uint16_t u16(std::string_view s, std::size_t at) {
  if (at + 2 > s.size()) throw ZipError("truncated archive");
  return static_cast<std::uint16_t>(static_cast<unsigned char>(s[at]) |
                                    static_cast<unsigned char>(s[at + 1]) << 8);
}

std::uint32_t u32(std::string_view s, std::size_t at) {
  return static_cast<std::uint32_t>(u16(s, at)) | static_cast<std::uint32_t>(u16(s, at + 2)) << 16;
}

void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void put32(std::string& out, std::uint32_t v) {
  put16(out, static_cast<std::uint16_t>(v & 0xffff));
  put16(out, static_cast<std::uint16_t>(v >> 16));
}

std::string inflate_raw(std::string_view in, std::uint32_t expected) {
  std::string out(expected, '\0');
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw ZipError("inflate init failed");
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(in.data()));
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  int rc = inflate(&zs, Z_FINISH);
  const auto produced = zs.total_out;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || produced != expected) throw ZipError("corrupt deflate stream");
  return out;
}

std::uint32_t crc_of(std::string_view data) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size())));
}

}  // namespace

std::vector<Entry> read_archive(std::string_view archive, std::uint64_t max_total_bytes) {
  if (archive.size() < 22) throw ZipError("not a zip archive");
  // The end record sits in the last 22 + 65535 bytes.
  std::size_t end = std::string_view::npos;
  const std::size_t lowest = archive.size() > 22 + 0xffff ? archive.size() - 22 - 0xffff : 0;
  for (std::size_t i = archive.size() - 22 + 1; i-- > lowest;) {
    if (u32(archive, i) == kEndSig) {
      end = i;
      break;
    }
  }
  if (end == std::string_view::npos) throw ZipError("end of central directory not found");

  const std::uint16_t count = u16(archive, end + 10);
  const std::uint32_t cd_offset = u32(archive, end + 16);
  if (cd_offset > end) throw ZipError("central directory offset out of range");

  std::vector<Entry> entries;
  std::uint64_t total = 0;
  std::size_t p = cd_offset;
  for (std::uint16_t n = 0; n < count; ++n) {
    if (u32(archive, p) != kCentralSig) throw ZipError("bad central directory entry");
    const std::uint16_t flags = u16(archive, p + 8);
    const std::uint16_t method = u16(archive, p + 10);
    const std::uint32_t crc = u32(archive, p + 16);
    const std::uint32_t csize = u32(archive, p + 20);
    const std::uint32_t usize = u32(archive, p + 24);
    const std::uint16_t name_len = u16(archive, p + 28);
    const std::uint16_t extra_len = u16(archive, p + 30);
    const std::uint16_t comment_len = u16(archive, p + 32);
    const std::uint32_t local = u32(archive, p + 42);
    if (p + 46 + name_len > archive.size()) throw ZipError("truncated central directory");
    Entry entry;
    entry.name = std::string(archive.substr(p + 46, name_len));
    p += 46 + name_len + extra_len + comment_len;

    if (flags & 0x1) throw ZipError("encrypted entry '" + entry.name + "'");
    if (csize == 0xffffffff || usize == 0xffffffff) throw ZipError("zip64 is not supported");
    entry.is_directory = !entry.name.empty() && entry.name.back() == '/';
    if (entry.is_directory) {
      entries.push_back(std::move(entry));
      continue;
    }
    total += usize;
    if (total > max_total_bytes) throw ZipError("uncompressed size exceeds limit");

    if (u32(archive, local) != kLocalSig) throw ZipError("bad local header for '" + entry.name + "'");
    const std::size_t data_at = local + 30 + u16(archive, local + 26) + u16(archive, local + 28);
    if (data_at + csize > archive.size()) throw ZipError("truncated data for '" + entry.name + "'");
    const std::string_view raw = archive.substr(data_at, csize);
    if (method == 0) {
      if (csize != usize) throw ZipError("size mismatch for '" + entry.name + "'");
      entry.data = std::string(raw);
    } else if (method == 8) {
      entry.data = inflate_raw(raw, usize);
    } else {
      throw ZipError("unsupported compression method " + std::to_string(method));
    }
    if (crc_of(entry.data) != crc) throw ZipError("CRC mismatch for '" + entry.name + "'");
    entries.push_back(std::move(entry));
  }
  return entries;
}

void Writer::add(const std::string& name, std::string_view data) {
  Record r;
  r.name = name;
  r.crc = crc_of(data);
  r.size = static_cast<std::uint32_t>(data.size());
  r.offset = static_cast<std::uint32_t>(out_.size());

  std::string compressed(compressBound(static_cast<uLong>(data.size())) + 16, '\0');
  z_stream zs{};
  deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, -MAX_WBITS, 8, Z_DEFAULT_STRATEGY);
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
  zs.avail_in = static_cast<uInt>(data.size());
  zs.next_out = reinterpret_cast<Bytef*>(compressed.data());
  zs.avail_out = static_cast<uInt>(compressed.size());
  deflate(&zs, Z_FINISH);
  compressed.resize(zs.total_out);
  deflateEnd(&zs);
  r.compressed = static_cast<std::uint32_t>(compressed.size());

  put32(out_, kLocalSig);
  put16(out_, 20);
  put16(out_, 0x0800);  // UTF-8 names
  put16(out_, 8);
  put16(out_, 0);
  put16(out_, 0x21);  // 1980-01-01
  put32(out_, r.crc);
  put32(out_, r.compressed);
  put32(out_, r.size);
  put16(out_, static_cast<std::uint16_t>(name.size()));
  put16(out_, 0);
  out_ += name;
  out_ += compressed;
  records_.push_back(std::move(r));
}

std::string Writer::finish() {
  const auto cd_offset = static_cast<std::uint32_t>(out_.size());
  for (const auto& r : records_) {
    put32(out_, kCentralSig);
    put16(out_, 20);
    put16(out_, 20);
    put16(out_, 0x0800);
    put16(out_, 8);
    put16(out_, 0);
    put16(out_, 0x21);
    put32(out_, r.crc);
    put32(out_, r.compressed);
    put32(out_, r.size);
    put16(out_, static_cast<std::uint16_t>(r.name.size()));
    put16(out_, 0);
    put16(out_, 0);
    put16(out_, 0);
    put16(out_, 0);
    put32(out_, 0);
    put32(out_, r.offset);
    out_ += r.name;
  }
  const auto cd_size = static_cast<std::uint32_t>(out_.size()) - cd_offset;
  put32(out_, kEndSig);
  put16(out_, 0);
  put16(out_, 0);
  put16(out_, static_cast<std::uint16_t>(records_.size()));
  put16(out_, static_cast<std::uint16_t>(records_.size()));
  put32(out_, cd_size);
  put32(out_, cd_offset);
  put16(out_, 0);
  std::string result = std::move(out_);
  out_.clear();
  records_.clear();
  return result;
}

}  // namespace debias::zip
