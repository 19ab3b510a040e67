#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "plugnet/util.hpp"

namespace plugnet {

// ---------------------------------------------------------------------------
// Byte entropy

// H = -sum p(b) log2 p(b) over the 256-symbol byte distribution.
// Throws EmptyInput on empty data.
double shannon_entropy(std::span<const std::uint8_t> data);

inline constexpr double kDefaultEntropyThreshold = 7.0;
inline constexpr std::size_t kDefaultEntropyMinLen = 32;

// Flag rule: fields of at least min_len bytes flag at H >= threshold; shorter
// fields flag at H >= 0.9 * log2(len), rescaled by threshold/7 so raising the
// threshold tightens short fields proportionally (and a threshold above 8
// flags nothing). Single-byte fields have no distribution and never flag.
bool entropy_flagged(std::size_t byte_count, double bits_per_byte,
                     double threshold, std::size_t min_len);

struct EntropyField {
  std::uint64_t seq = 0;  // trace record the field came from
  std::string name;
  std::size_t byte_count = 0;
  double bits_per_byte = 0.0;
  bool flagged = false;
};

struct EntropyReport {
  double threshold = kDefaultEntropyThreshold;
  std::size_t min_len = kDefaultEntropyMinLen;
  std::vector<EntropyField> fields;
};

// Per field instance over every record of a JSON-lines trace. Throws
// TraceParseError (with the 1-based line) on malformed lines.
EntropyReport classify_trace_text(
    const std::string& trace_jsonl,
    double threshold = kDefaultEntropyThreshold,
    std::size_t min_len = kDefaultEntropyMinLen);

EntropyReport classify_trace_fields(
    const std::string& trace_path,
    double threshold = kDefaultEntropyThreshold,
    std::size_t min_len = kDefaultEntropyMinLen);

std::string entropy_report_json(const EntropyReport& report);

// ---------------------------------------------------------------------------
// Blob scanning

enum class BlobKind : std::uint8_t {
  PemCertificate,
  SquashFS,
  CramFS,
  JFFS2,
  UBIFS,
  RomFS,
};

const char* blob_kind_name(BlobKind kind);

struct BlobFinding {
  std::size_t offset = 0;
  BlobKind kind = BlobKind::PemCertificate;
  std::string detail;
};

// Every occurrence of the exact ASCII header "-----BEGIN CERTIFICATE-----",
// ascending by offset.
std::vector<BlobFinding> find_pem_certificates(
    std::span<const std::uint8_t> blob);

// Filesystem images by magic signature. JFFS2 and UBIFS matches are validated
// as node headers and reported once per contiguous node region; superblock
// magics (SquashFS, CramFS, RomFS) are reported per occurrence. detail is
// "read-only" or "writable".
std::vector<BlobFinding> identify_filesystems(std::span<const std::uint8_t> blob);

struct FsSignature {
  BlobKind kind;
  Bytes magic;
  bool writable;
  std::string variant;
};

const std::vector<FsSignature>& filesystem_signature_table();

// JSON rendering of the table; data/fs_signatures.json ships this verbatim.
std::string filesystem_signature_table_json();

std::string findings_json(const std::vector<BlobFinding>& findings);

// CRC32 as used by JFFS2/mtd node headers: reflected 0xEDB88320, zero init,
// no final inversion.
std::uint32_t crc32_mtd(std::span<const std::uint8_t> data);

}  // namespace plugnet
