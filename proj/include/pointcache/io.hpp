#pragma once

// Binary containers: sample streams (PCFS), class banks (PCBK), point clouds
// (PCPT) and cache dumps (PCCA). All integers and floats are little-endian;
// features are stored as f32 and widened to double on load.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "pointcache/cache.hpp"
#include "pointcache/encoding.hpp"
#include "pointcache/error.hpp"
#include "pointcache/numeric.hpp"

namespace pointcache::io {

inline constexpr std::array<char, 4> kStreamMagic = {'P', 'C', 'F', 'S'};
inline constexpr std::array<char, 4> kBankMagic = {'P', 'C', 'B', 'K'};
inline constexpr std::array<char, 4> kCloudMagic = {'P', 'C', 'P', 'T'};
inline constexpr std::array<char, 4> kCacheMagic = {'P', 'C', 'C', 'A'};
inline constexpr std::uint16_t kFormatVersion = 1;

inline constexpr std::uint32_t kFlagHasLabels = 1u << 0;
inline constexpr std::uint32_t kFlagHasPatches = 1u << 1;

// Appends little-endian values to a byte buffer.
class ByteWriter {
public:
  void bytes(const void* data, std::size_t n) {
    buf_.append(static_cast<const char*>(data), n);
  }
  void magic(const std::array<char, 4>& m) { bytes(m.data(), m.size()); }

  template <typename T>
  void le(T value) {
    static_assert(std::is_integral_v<T>);
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      buf_.push_back(static_cast<char>(u & 0xffu));
      u = static_cast<U>(u >> 8);
    }
  }
  void f32(double value) { le(std::bit_cast<std::uint32_t>(static_cast<float>(value))); }
  void f64(double value) { le(std::bit_cast<std::uint64_t>(value)); }
  void f32s(std::span<const double> values) {
    for (double v : values) f32(v);
  }

  const std::string& buffer() const noexcept { return buf_; }
  void flush_to(std::ostream& out) {
    out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    buf_.clear();
  }

private:
  std::string buf_;
};

// Reads little-endian values and tracks the byte offset for error reports.
class ByteReader {
public:
  explicit ByteReader(std::istream& in) : in_(in) {}

  std::uint64_t offset() const noexcept { return offset_; }
  void set_record(std::int64_t record) noexcept { record_ = record; }

  void bytes(void* dst, std::size_t n, const char* what) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    const auto got = static_cast<std::size_t>(in_.gcount());
    if (got != n)
      throw FormatError(std::string("truncated input while reading ") + what, offset_ + got, record_);
    offset_ += n;
  }

  void expect_magic(const std::array<char, 4>& m, const char* kind) {
    std::array<char, 4> got{};
    bytes(got.data(), got.size(), "magic");
    if (got != m)
      throw FormatError(std::string("bad magic for ") + kind + " file", 0);
  }

  template <typename T>
  T le(const char* what) {
    static_assert(std::is_integral_v<T>);
    std::array<unsigned char, sizeof(T)> raw{};
    bytes(raw.data(), raw.size(), what);
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = sizeof(T); i-- > 0;) u = static_cast<decltype(u)>((u << 8) | raw[i]);
    return static_cast<T>(u);
  }

  double f32(const char* what) {
    const std::uint64_t at = offset_;
    const float v = std::bit_cast<float>(le<std::uint32_t>(what));
    if (!std::isfinite(v)) throw FormatError(std::string("non-finite ") + what, at, record_);
    return static_cast<double>(v);
  }
  double f64(const char* what) {
    const std::uint64_t at = offset_;
    const double v = std::bit_cast<double>(le<std::uint64_t>(what));
    if (!std::isfinite(v)) throw FormatError(std::string("non-finite ") + what, at, record_);
    return v;
  }
  void f32s(std::span<double> out, const char* what) {
    for (double& v : out) v = f32(what);
  }

  bool at_eof() { return in_.peek() == std::char_traits<char>::eof(); }

  [[noreturn]] void fail(const std::string& what) const { throw FormatError(what, offset_, record_); }

private:
  std::istream& in_;
  std::uint64_t offset_ = 0;
  std::int64_t record_ = FormatError::kNoRecord;
};

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  return in;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  return out;
}

inline void check_version(ByteReader& reader, const char* kind) {
  const auto version = reader.le<std::uint16_t>("version");
  if (version != kFormatVersion)
    throw FormatError(std::string("unsupported ") + kind + " version " + std::to_string(version),
                      reader.offset() - 2);
}

// ---- sample streams --------------------------------------------------------

struct StreamHeader {
  std::uint32_t dim = 0;
  std::uint32_t patches = 0;
  std::uint32_t classes = 0;
  std::uint64_t count = 0;
  std::uint32_t flags = 0;

  bool has_labels() const noexcept { return (flags & kFlagHasLabels) != 0; }
  bool has_patches() const noexcept { return (flags & kFlagHasPatches) != 0; }

  static constexpr std::size_t kBytes = 4 + 2 + 4 + 4 + 4 + 8 + 4;
  std::uint64_t record_bytes() const noexcept {
    return 8 + 4 + 4ull * dim + 4ull * patches * dim;
  }
};

inline void encode_header(ByteWriter& w, const StreamHeader& h) {
  w.magic(kStreamMagic);
  w.le<std::uint16_t>(kFormatVersion);
  w.le<std::uint32_t>(h.dim);
  w.le<std::uint32_t>(h.patches);
  w.le<std::uint32_t>(h.classes);
  w.le<std::uint64_t>(h.count);
  w.le<std::uint32_t>(h.flags);
}

inline void encode_record(ByteWriter& w, const StreamHeader& h, const EncodedSample& s) {
  if (s.global_feature.size() != h.dim)
    throw ShapeError("stream record: feature dim " + std::to_string(s.global_feature.size()) +
                     " vs header dim " + std::to_string(h.dim));
  if (h.has_patches() &&
      (s.patch_features.rows() != h.patches || s.patch_features.cols() != h.dim))
    throw ShapeError("stream record: patch matrix does not match header");
  if (!all_finite(s.global_feature) || !all_finite(s.patch_features.data()))
    throw DegenerateInputError("stream record: non-finite feature");
  w.le<std::uint64_t>(s.sample_id);
  w.le<std::int32_t>(s.true_label ? static_cast<std::int32_t>(*s.true_label) : -1);
  w.f32s(s.global_feature);
  if (h.has_patches()) w.f32s(s.patch_features.data());
}

// Header fields derived from the samples; `classes` is the bank size.
inline StreamHeader header_for(std::span<const EncodedSample> samples, std::uint32_t dim,
                               std::uint32_t classes) {
  StreamHeader h;
  h.dim = dim;
  h.classes = classes;
  h.count = samples.size();
  h.flags = kFlagHasPatches;
  if (!samples.empty()) h.patches = static_cast<std::uint32_t>(samples.front().patch_features.rows());
  for (const auto& s : samples)
    if (s.true_label) h.flags |= kFlagHasLabels;
  if (h.patches == 0) h.flags &= ~kFlagHasPatches;
  return h;
}

inline void write_stream(std::ostream& out, const StreamHeader& header,
                         std::span<const EncodedSample> samples) {
  if (header.count != samples.size()) throw ConsistencyError("write_stream: header count mismatch");
  ByteWriter w;
  encode_header(w, header);
  w.flush_to(out);
  for (const auto& s : samples) {
    encode_record(w, header, s);
    w.flush_to(out);
  }
  if (!out) throw Error("write_stream: write failed");
}

inline void write_stream(const std::filesystem::path& path, const StreamHeader& header,
                         std::span<const EncodedSample> samples) {
  auto out = open_output(path);
  write_stream(out, header, samples);
}

// Lazy, record-at-a-time reader. Samples without stored patches get their
// global feature as a single patch.
class StreamReader {
public:
  explicit StreamReader(std::istream& in) : reader_(in) { read_header(); }

  const StreamHeader& header() const noexcept { return header_; }
  std::uint64_t records_read() const noexcept { return next_; }

  std::optional<EncodedSample> next() {
    if (next_ == header_.count) {
      if (!reader_.at_eof()) reader_.fail("trailing bytes after " + std::to_string(header_.count) + " records");
      return std::nullopt;
    }
    reader_.set_record(static_cast<std::int64_t>(next_));
    EncodedSample s;
    s.sample_id = reader_.le<std::uint64_t>("sample id");
    const auto label = reader_.le<std::int32_t>("label");
    if (label < -1 || (label >= 0 && header_.classes != 0 &&
                       static_cast<std::uint32_t>(label) >= header_.classes))
      throw FormatError("label " + std::to_string(label) + " out of range", reader_.offset() - 4,
                        static_cast<std::int64_t>(next_));
    if (label >= 0) s.true_label = static_cast<ClassIndex>(label);
    s.global_feature.resize(header_.dim);
    reader_.f32s(s.global_feature, "global feature");
    if (header_.has_patches()) {
      s.patch_features = Matrix(header_.patches, header_.dim);
      for (std::size_t p = 0; p < header_.patches; ++p)
        reader_.f32s(s.patch_features.row(p), "patch feature");
    } else {
      s.patch_features = Matrix(1, header_.dim);
      std::copy(s.global_feature.begin(), s.global_feature.end(), s.patch_features.row(0).begin());
    }
    ++next_;
    return s;
  }

private:
  void read_header() {
    reader_.expect_magic(kStreamMagic, "stream");
    check_version(reader_, "stream");
    header_.dim = reader_.le<std::uint32_t>("dim");
    header_.patches = reader_.le<std::uint32_t>("patch count");
    header_.classes = reader_.le<std::uint32_t>("class count");
    header_.count = reader_.le<std::uint64_t>("sample count");
    header_.flags = reader_.le<std::uint32_t>("flags");
    if (header_.dim == 0) reader_.fail("stream header: zero dimension");
    if ((header_.flags & ~(kFlagHasLabels | kFlagHasPatches)) != 0) reader_.fail("stream header: unknown flags");
    if (header_.has_patches() != (header_.patches > 0))
      reader_.fail("stream header: patch flag disagrees with patch count");
  }

  ByteReader reader_;
  StreamHeader header_;
  std::uint64_t next_ = 0;
};

// Opens a stream file and keeps the file alive alongside its reader.
class StreamFile {
public:
  explicit StreamFile(const std::filesystem::path& path)
      : in_(open_input(path)), reader_(in_) {}

  const StreamHeader& header() const noexcept { return reader_.header(); }
  std::optional<EncodedSample> next() { return reader_.next(); }

private:
  std::ifstream in_;
  StreamReader reader_;
};

inline std::vector<EncodedSample> read_stream(const std::filesystem::path& path,
                                              StreamHeader* header = nullptr) {
  StreamFile file(path);
  if (header) *header = file.header();
  std::vector<EncodedSample> out;
  while (auto s = file.next()) out.push_back(std::move(*s));
  return out;
}

// ---- class banks -----------------------------------------------------------

inline constexpr double kBankWarnTolerance = 1e-4;

inline void write_bank(std::ostream& out, const ClassBank& bank) {
  ByteWriter w;
  w.magic(kBankMagic);
  w.le<std::uint16_t>(kFormatVersion);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(bank.classes()));
  w.le<std::uint32_t>(static_cast<std::uint32_t>(bank.dim()));
  w.f32(bank.temperature());
  for (const auto& name : bank.names()) {
    w.le<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
  }
  w.f32s(bank.embeddings().data());
  w.flush_to(out);
  if (!out) throw Error("write_bank: write failed");
}

inline void write_bank(const std::filesystem::path& path, const ClassBank& bank) {
  auto out = open_output(path);
  write_bank(out, bank);
}

// Rows further than 1e-5 from unit norm are renormalized; beyond 1e-4 a
// warning goes to `warnings` when given.
inline ClassBank read_bank(std::istream& in, std::ostream* warnings = nullptr) {
  ByteReader r(in);
  r.expect_magic(kBankMagic, "bank");
  check_version(r, "bank");
  const auto classes = r.le<std::uint32_t>("class count");
  const auto dim = r.le<std::uint32_t>("dim");
  const double temperature = r.f32("temperature");
  if (classes < 2 || dim == 0) r.fail("bank header: need >= 2 classes and dim >= 1");
  std::vector<std::string> names(classes);
  for (auto& name : names) {
    const auto len = r.le<std::uint32_t>("name length");
    if (len > (1u << 16)) r.fail("bank: class name too long");
    name.resize(len);
    r.bytes(name.data(), len, "class name");
  }
  Matrix rows(classes, dim);
  for (std::size_t c = 0; c < classes; ++c) {
    r.set_record(static_cast<std::int64_t>(c));
    r.f32s(rows.row(c), "embedding");
  }
  if (!r.at_eof()) r.fail("bank: trailing bytes");
  for (std::size_t c = 0; c < classes; ++c) {
    const double err = std::abs(l2_norm(rows.row(c)) - 1.0);
    if (err <= kUnitNormTolerance) continue;
    if (err > kBankWarnTolerance && warnings)
      *warnings << "warning: bank row " << c << " ('" << names[c] << "') has norm off by " << err
                << "; renormalized\n";
    const Vector unit = l2_normalize(rows.row(c));
    std::copy(unit.begin(), unit.end(), rows.row(c).begin());
  }
  return ClassBank(std::move(rows), std::move(names), temperature);
}

inline ClassBank read_bank(const std::filesystem::path& path, std::ostream* warnings = nullptr) {
  auto in = open_input(path);
  return read_bank(in, warnings);
}

// ---- point clouds ----------------------------------------------------------

struct LabeledCloud {
  PointCloud cloud;
  std::optional<ClassIndex> label;
};

inline void write_cloud(std::ostream& out, const LabeledCloud& item) {
  ByteWriter w;
  w.magic(kCloudMagic);
  w.le<std::uint16_t>(kFormatVersion);
  w.le<std::int32_t>(item.label ? static_cast<std::int32_t>(*item.label) : -1);
  w.le<std::uint64_t>(item.cloud.size());
  for (const auto& p : item.cloud.points)
    for (double x : p) w.f32(x);
  w.flush_to(out);
  if (!out) throw Error("write_cloud: write failed");
}

inline void write_cloud(const std::filesystem::path& path, const LabeledCloud& item) {
  auto out = open_output(path);
  write_cloud(out, item);
}

inline LabeledCloud read_cloud(std::istream& in) {
  ByteReader r(in);
  r.expect_magic(kCloudMagic, "cloud");
  check_version(r, "cloud");
  LabeledCloud out;
  const auto label = r.le<std::int32_t>("label");
  if (label < -1) r.fail("cloud: invalid label");
  if (label >= 0) out.label = static_cast<ClassIndex>(label);
  const auto n = r.le<std::uint64_t>("point count");
  if (n == 0) r.fail("cloud: no points");
  out.cloud.points.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    r.set_record(static_cast<std::int64_t>(i));
    for (double& x : out.cloud.points[i]) x = r.f32("coordinate");
  }
  if (!r.at_eof()) r.fail("cloud: trailing bytes");
  return out;
}

// Whitespace-separated "x y z" per line; extra columns and '#' comments are
// ignored.
inline LabeledCloud read_xyz(std::istream& in) {
  LabeledCloud out;
  std::string line;
  std::uint64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    Point3 p;
    if (!(fields >> p[0])) continue;
    if (!(fields >> p[1] >> p[2]))
      throw FormatError("xyz: expected three coordinates on line " + std::to_string(lineno), 0,
                        static_cast<std::int64_t>(lineno - 1));
    out.cloud.points.push_back(p);
  }
  out.cloud.validate();
  return out;
}

inline LabeledCloud read_cloud(const std::filesystem::path& path) {
  auto in = open_input(path);
  const auto ext = path.extension().string();
  if (ext == ".xyz" || ext == ".txt") return read_xyz(in);
  return read_cloud(in);
}

// ---- cache dumps -----------------------------------------------------------

struct CacheDumpEntry {
  ClassIndex label = 0;
  SampleId sample_id = 0;
  double entropy = 0.0;
  Vector feature;
  Matrix parts;

  bool operator==(const CacheDumpEntry&) const = default;
};

struct CacheDump {
  std::uint32_t classes = 0;
  std::uint32_t shots = 0;
  std::uint32_t parts = 0;
  std::uint32_t dim = 0;
  std::vector<CacheDumpEntry> entries;
};

inline void write_cache(std::ostream& out, const HierarchicalCache& cache) {
  ByteWriter w;
  w.magic(kCacheMagic);
  w.le<std::uint16_t>(kFormatVersion);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(cache.classes()));
  w.le<std::uint32_t>(static_cast<std::uint32_t>(cache.shots()));
  w.le<std::uint32_t>(static_cast<std::uint32_t>(cache.parts()));
  w.le<std::uint32_t>(static_cast<std::uint32_t>(cache.dim()));
  w.le<std::uint64_t>(cache.size());
  for (ClassIndex c = 0; c < cache.classes(); ++c) {
    const auto& globals = cache.global_entries(c);
    const auto& locals = cache.local_entries(c);
    for (std::size_t s = 0; s < globals.size(); ++s) {
      w.le<std::uint32_t>(static_cast<std::uint32_t>(c));
      w.le<std::uint64_t>(globals[s].sample_id);
      w.f64(globals[s].entropy);
      w.le<std::uint32_t>(static_cast<std::uint32_t>(locals[s].parts.rows()));
      w.f32s(globals[s].feature);
      w.f32s(locals[s].parts.data());
    }
  }
  w.flush_to(out);
  if (!out) throw Error("write_cache: write failed");
}

inline CacheDump read_cache(std::istream& in) {
  ByteReader r(in);
  r.expect_magic(kCacheMagic, "cache");
  check_version(r, "cache");
  CacheDump dump;
  dump.classes = r.le<std::uint32_t>("class count");
  dump.shots = r.le<std::uint32_t>("shots");
  dump.parts = r.le<std::uint32_t>("parts");
  dump.dim = r.le<std::uint32_t>("dim");
  const auto count = r.le<std::uint64_t>("entry count");
  if (count > std::uint64_t{dump.classes} * dump.shots) r.fail("cache: more entries than capacity");
  for (std::uint64_t i = 0; i < count; ++i) {
    r.set_record(static_cast<std::int64_t>(i));
    CacheDumpEntry e;
    e.label = r.le<std::uint32_t>("label");
    if (e.label >= dump.classes) r.fail("cache: label out of range");
    e.sample_id = r.le<std::uint64_t>("sample id");
    e.entropy = r.f64("entropy");
    const auto rows = r.le<std::uint32_t>("part rows");
    if (rows == 0 || rows > dump.parts) r.fail("cache: bad part row count");
    e.feature.resize(dump.dim);
    r.f32s(e.feature, "feature");
    e.parts = Matrix(rows, dump.dim);
    for (std::size_t p = 0; p < rows; ++p) r.f32s(e.parts.row(p), "part");
    dump.entries.push_back(std::move(e));
  }
  if (!r.at_eof()) r.fail("cache: trailing bytes");
  return dump;
}

}  // namespace pointcache::io
