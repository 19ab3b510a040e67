#include "plugnet/analysis.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "plugnet/errors.hpp"
#include "plugnet/messages.hpp"

namespace plugnet {

using ordered_json = nlohmann::ordered_json;

double shannon_entropy(std::span<const std::uint8_t> data) {
  if (data.empty()) {
    throw EmptyInput("entropy of an empty byte string is undefined");
  }
  std::array<std::uint64_t, 256> counts{};
  for (std::uint8_t b : data) ++counts[b];
  const double n = static_cast<double>(data.size());
  double h = 0.0;
  for (std::uint64_t c : counts) {
    if (c == 0) continue;
    double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return h <= 0.0 ? 0.0 : h;
}

bool entropy_flagged(std::size_t byte_count, double bits_per_byte,
                     double threshold, std::size_t min_len) {
  if (byte_count >= min_len) {
    return bits_per_byte >= threshold;
  }
  if (byte_count < 2) return false;
  double short_threshold = 0.9 * (threshold / kDefaultEntropyThreshold) *
                           std::log2(static_cast<double>(byte_count));
  return bits_per_byte >= short_threshold;
}

EntropyReport classify_trace_text(const std::string& trace_jsonl,
                                  double threshold, std::size_t min_len) {
  EntropyReport report;
  report.threshold = threshold;
  report.min_len = min_len;

  std::istringstream in(trace_jsonl);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const std::exception&) {
      throw TraceParseError("trace line is not valid JSON", line_no);
    }
    if (!j.contains("seq") || !j.contains("payload_hex") ||
        !j["payload_hex"].is_string()) {
      throw TraceParseError("trace line misses seq/payload_hex", line_no);
    }
    std::uint64_t seq = j["seq"].get<std::uint64_t>();
    ProtocolMessage msg;
    try {
      Bytes payload = from_hex(j["payload_hex"].get<std::string>());
      msg = deserialize(payload);
    } catch (const ParseError& e) {
      throw TraceParseError(std::string("payload does not parse: ") + e.what(),
                            line_no);
    }
    for (const FieldView& field : field_views(msg)) {
      EntropyField entry;
      entry.seq = seq;
      entry.name = field.name;
      entry.byte_count = field.bytes.size();
      entry.bits_per_byte =
          field.bytes.empty() ? 0.0 : shannon_entropy(field.bytes);
      entry.flagged = entropy_flagged(entry.byte_count, entry.bits_per_byte,
                                      threshold, min_len);
      report.fields.push_back(std::move(entry));
    }
  }
  return report;
}

EntropyReport classify_trace_fields(const std::string& trace_path,
                                    double threshold, std::size_t min_len) {
  std::ifstream f(trace_path, std::ios::binary);
  if (!f) throw IoError("cannot open trace file: " + trace_path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return classify_trace_text(buf.str(), threshold, min_len);
}

std::string entropy_report_json(const EntropyReport& report) {
  ordered_json j;
  j["threshold"] = report.threshold;
  j["min_len"] = report.min_len;
  ordered_json fields = ordered_json::array();
  for (const EntropyField& f : report.fields) {
    ordered_json e;
    e["seq"] = f.seq;
    e["name"] = f.name;
    e["byte_count"] = f.byte_count;
    e["bits_per_byte"] = f.bits_per_byte;
    e["flagged"] = f.flagged;
    fields.push_back(e);
  }
  j["fields"] = fields;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Blob scanning

const char* blob_kind_name(BlobKind kind) {
  switch (kind) {
    case BlobKind::PemCertificate:
      return "PemCertificate";
    case BlobKind::SquashFS:
      return "SquashFS";
    case BlobKind::CramFS:
      return "CramFS";
    case BlobKind::JFFS2:
      return "JFFS2";
    case BlobKind::UBIFS:
      return "UBIFS";
    case BlobKind::RomFS:
      return "RomFS";
  }
  return "?";
}

std::uint32_t crc32_mtd(std::span<const std::uint8_t> data) {
  std::uint32_t crc = 0;
  for (std::uint8_t b : data) {
    crc ^= b;
    for (int i = 0; i < 8; ++i) {
      crc = (crc >> 1) ^ (0xEDB88320u & (0u - (crc & 1u)));
    }
  }
  return crc;
}

namespace {

const char kPemHeader[] = "-----BEGIN CERTIFICATE-----";
constexpr std::size_t kPemHeaderLen = sizeof(kPemHeader) - 1;

std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t off,
                       bool big_endian) {
  return big_endian ? static_cast<std::uint16_t>((b[off] << 8) | b[off + 1])
                    : static_cast<std::uint16_t>(b[off] | (b[off + 1] << 8));
}

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t off,
                       bool big_endian) {
  if (big_endian) {
    return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) |
           (std::uint32_t(b[off + 2]) << 8) | b[off + 3];
  }
  return std::uint32_t(b[off]) | (std::uint32_t(b[off + 1]) << 8) |
         (std::uint32_t(b[off + 2]) << 16) | (std::uint32_t(b[off + 3]) << 24);
}

// JFFS2 node header: magic(2) nodetype(2) totlen(4) hdr_crc(4); hdr_crc is
// crc32_mtd over the first 8 bytes.
constexpr std::uint16_t kJffs2Magic = 0x1985;
constexpr std::uint16_t kJffs2NodeTypes[] = {0x2003, 0x2004, 0x2006, 0xe001,
                                             0xe002, 0xe008, 0xe009};

struct NodeProbe {
  bool valid = false;
  std::size_t length = 0;  // unaligned payload length
};

NodeProbe probe_jffs2_node(std::span<const std::uint8_t> blob, std::size_t off,
                           bool big_endian) {
  NodeProbe out;
  if (blob.size() - off < 12) return out;
  if (read_u16(blob, off, big_endian) != kJffs2Magic) return out;
  std::uint16_t nodetype = read_u16(blob, off + 2, big_endian);
  bool known = false;
  for (std::uint16_t t : kJffs2NodeTypes) known = known || t == nodetype;
  if (!known) return out;
  std::uint32_t totlen = read_u32(blob, off + 4, big_endian);
  if (totlen < 12 || totlen > blob.size() - off) return out;
  std::uint32_t hdr_crc = read_u32(blob, off + 8, big_endian);
  if (crc32_mtd(blob.subspan(off, 8)) != hdr_crc) return out;
  out.valid = true;
  out.length = totlen;
  return out;
}

// UBIFS common node header: magic(4) crc(4) sqnum(8) len(4) node_type(1)
// group_type(1) padding(2). Always little-endian on disk.
constexpr std::uint8_t kUbifsMagic[4] = {0x31, 0x18, 0x10, 0x06};
constexpr std::size_t kUbifsHeaderSize = 24;
constexpr std::uint8_t kUbifsMaxNodeType = 11;

NodeProbe probe_ubifs_node(std::span<const std::uint8_t> blob,
                           std::size_t off) {
  NodeProbe out;
  if (blob.size() - off < kUbifsHeaderSize) return out;
  if (std::memcmp(blob.data() + off, kUbifsMagic, 4) != 0) return out;
  std::uint32_t len = read_u32(blob, off + 16, false);
  if (len < kUbifsHeaderSize || len > blob.size() - off) return out;
  if (blob[off + 20] > kUbifsMaxNodeType) return out;
  out.valid = true;
  out.length = len;
  return out;
}

// Walks a contiguous run of validated nodes (plus 0xFF erase padding between
// them) and returns the offset just past the region.
template <typename Probe>
std::size_t walk_node_region(std::span<const std::uint8_t> blob,
                             std::size_t start, std::size_t align,
                             Probe&& probe) {
  std::size_t cur = start;
  while (true) {
    NodeProbe node = probe(cur);
    if (!node.valid) return cur;
    std::size_t advance = (node.length + align - 1) / align * align;
    if (advance == 0 || cur + advance > blob.size()) return blob.size();
    cur += advance;
    std::size_t peek = cur;
    while (peek < blob.size() && blob[peek] == 0xff) ++peek;
    if (peek == blob.size()) return blob.size();  // trailing erase padding
    if (probe(peek).valid) {
      cur = peek;
    }
    // else: next probe at cur fails and the region ends there
  }
}

bool match_at(std::span<const std::uint8_t> blob, std::size_t off,
              const Bytes& magic) {
  if (blob.size() - off < magic.size()) return false;
  return std::memcmp(blob.data() + off, magic.data(), magic.size()) == 0;
}

}  // namespace

std::vector<BlobFinding> find_pem_certificates(
    std::span<const std::uint8_t> blob) {
  std::vector<BlobFinding> out;
  if (blob.size() < kPemHeaderLen) return out;
  for (std::size_t i = 0; i + kPemHeaderLen <= blob.size(); ++i) {
    if (std::memcmp(blob.data() + i, kPemHeader, kPemHeaderLen) == 0) {
      out.push_back(
          BlobFinding{i, BlobKind::PemCertificate, "PEM certificate header"});
    }
  }
  return out;
}

const std::vector<FsSignature>& filesystem_signature_table() {
  static const std::vector<FsSignature> table = {
      {BlobKind::SquashFS, {0x68, 0x73, 0x71, 0x73}, false, "little-endian"},
      {BlobKind::SquashFS, {0x73, 0x71, 0x73, 0x68}, false, "big-endian"},
      {BlobKind::CramFS, {0x45, 0x3d, 0xcd, 0x28}, false, "little-endian"},
      {BlobKind::CramFS, {0x28, 0xcd, 0x3d, 0x45}, false, "big-endian"},
      {BlobKind::JFFS2, {0x85, 0x19}, true, "little-endian"},
      {BlobKind::JFFS2, {0x19, 0x85}, true, "big-endian"},
      {BlobKind::UBIFS, {0x31, 0x18, 0x10, 0x06}, true, "little-endian"},
      {BlobKind::RomFS,
       {0x2d, 0x72, 0x6f, 0x6d, 0x31, 0x66, 0x73, 0x2d},
       false,
       "ascii"},
  };
  return table;
}

std::string filesystem_signature_table_json() {
  ordered_json j;
  ordered_json sigs = ordered_json::array();
  for (const FsSignature& s : filesystem_signature_table()) {
    ordered_json e;
    e["kind"] = blob_kind_name(s.kind);
    e["variant"] = s.variant;
    e["magic_hex"] = to_hex(s.magic);
    e["writable"] = s.writable;
    sigs.push_back(e);
  }
  j["signatures"] = sigs;
  return j.dump(2) + "\n";
}

std::vector<BlobFinding> identify_filesystems(
    std::span<const std::uint8_t> blob) {
  std::vector<BlobFinding> out;
  const auto& table = filesystem_signature_table();
  const FsSignature* squash_le = &table[0];
  const FsSignature* squash_be = &table[1];
  const FsSignature* cram_le = &table[2];
  const FsSignature* cram_be = &table[3];
  const FsSignature* romfs = &table[7];

  std::size_t i = 0;
  while (i < blob.size()) {
    if (match_at(blob, i, romfs->magic)) {
      out.push_back(BlobFinding{i, BlobKind::RomFS, "read-only"});
      i += romfs->magic.size();
      continue;
    }
    NodeProbe ubifs = probe_ubifs_node(blob, i);
    if (ubifs.valid) {
      out.push_back(BlobFinding{i, BlobKind::UBIFS, "writable"});
      i = walk_node_region(blob, i, 8, [&](std::size_t off) {
        return probe_ubifs_node(blob, off);
      });
      continue;
    }
    if (match_at(blob, i, squash_le->magic) ||
        match_at(blob, i, squash_be->magic)) {
      out.push_back(BlobFinding{i, BlobKind::SquashFS, "read-only"});
      i += 4;
      continue;
    }
    if (match_at(blob, i, cram_le->magic) || match_at(blob, i, cram_be->magic)) {
      out.push_back(BlobFinding{i, BlobKind::CramFS, "read-only"});
      i += 4;
      continue;
    }
    bool jffs2_found = false;
    for (bool big_endian : {false, true}) {
      if (probe_jffs2_node(blob, i, big_endian).valid) {
        out.push_back(BlobFinding{i, BlobKind::JFFS2, "writable"});
        i = walk_node_region(blob, i, 4, [&, big_endian](std::size_t off) {
          return probe_jffs2_node(blob, off, big_endian);
        });
        jffs2_found = true;
        break;
      }
    }
    if (jffs2_found) continue;
    ++i;
  }
  return out;
}

std::string findings_json(const std::vector<BlobFinding>& findings) {
  ordered_json j;
  ordered_json arr = ordered_json::array();
  for (const BlobFinding& f : findings) {
    ordered_json e;
    e["offset"] = f.offset;
    e["kind"] = blob_kind_name(f.kind);
    e["detail"] = f.detail;
    arr.push_back(e);
  }
  j["findings"] = arr;
  return j.dump(2) + "\n";
}

}  // namespace plugnet
