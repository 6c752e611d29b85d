#include "memguard/embedding_set.hpp"

#include "memguard/atomic_write.hpp"
#include "memguard/errors.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace memguard {

namespace {

constexpr std::size_t kHeaderBytes = 16;
constexpr char kMagic[4] = {'E', 'M', 'B', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const std::string& in, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  return v;
}

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open embedding file", path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("read failure", path.string());
  return std::move(buf).str();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

EmbeddingSet decode_csv(const std::string& text, std::string name, bool labeled) {
  std::vector<float> values;
  std::vector<Label> labels;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::size_t line_start = 0;
  while (line_start < text.size()) {
    std::size_t line_end = text.find('\n', line_start);
    if (line_end == std::string::npos) line_end = text.size();
    std::string_view line = trim(std::string_view(text).substr(line_start, line_end - line_start));
    const std::size_t offset = line_start;
    line_start = line_end + 1;
    if (line.empty()) continue;

    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (true) {
      std::size_t comma = line.find(',', pos);
      fields.push_back(trim(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos)));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    const std::size_t n_values = labeled ? fields.size() - 1 : fields.size();
    if (n_values == 0) throw FormatError("csv row has no value columns", offset);
    if (cols == 0) {
      cols = n_values;
    } else if (n_values != cols) {
      throw FormatError("csv row has " + std::to_string(n_values) + " columns, expected " + std::to_string(cols), offset);
    }
    for (std::size_t j = 0; j < n_values; ++j) {
      float v = 0.0f;
      auto f = fields[j];
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size()) {
        throw FormatError("cannot parse csv value '" + std::string(f) + "'", offset);
      }
      values.push_back(v);
    }
    if (labeled) {
      auto f = fields.back();
      Label label = 0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), label);
      if (ec != std::errc() || ptr != f.data() + f.size()) {
        throw FormatError("cannot parse csv label '" + std::string(f) + "'", offset);
      }
      labels.push_back(label);
    }
    ++rows;
  }
  if (rows == 0) throw FormatError("csv file has no rows", 0);
  RowMatrixF m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  std::copy(values.begin(), values.end(), m.data());
  std::optional<std::vector<Label>> opt_labels;
  if (labeled) opt_labels = std::move(labels);
  return EmbeddingSet(std::move(name), std::move(m), std::move(opt_labels));
}

std::string encode_csv(const EmbeddingSet& set) {
  std::string out;
  char buf[64];
  const auto& labels = set.labels();
  for (std::size_t i = 0; i < set.rows(); ++i) {
    auto r = set.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (j > 0) out.push_back(',');
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), r[j]);
      out.append(buf, ptr);
    }
    if (labels) {
      out.push_back(',');
      out += std::to_string((*labels)[i]);
    }
    out.push_back('\n');
  }
  return out;
}

}  // namespace

EmbeddingSet::EmbeddingSet(std::string name, RowMatrixF vectors, std::optional<std::vector<Label>> labels)
    : name_(std::move(name)), vectors_(std::move(vectors)), labels_(std::move(labels)) {
  if (vectors_.rows() < 1 || vectors_.cols() < 1) {
    throw UsageError("embedding set '" + name_ + "' must have at least one row and one column");
  }
  const std::size_t n = rows();
  const std::size_t k = dims();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (!std::isfinite(vectors_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)))) {
        throw ValidationError("non-finite entry in embedding set '" + name_ + "'", i);
      }
    }
  }
  if (labels_) {
    if (labels_->size() != n) {
      throw UsageError("embedding set '" + name_ + "' has " + std::to_string(labels_->size()) + " labels for " +
                       std::to_string(n) + " rows");
    }
    for (std::size_t i = 0; i < n; ++i) {
      if ((*labels_)[i] < 0) throw ValidationError("negative label in embedding set '" + name_ + "'", i);
    }
  }
}

EmbeddingSet EmbeddingSet::renamed(std::string name) const {
  EmbeddingSet copy = *this;
  copy.name_ = std::move(name);
  return copy;
}

std::string encode_emb1(const EmbeddingSet& set) {
  static_assert(std::endian::native == std::endian::little, "EMB1 encoding assumes a little-endian host");
  const std::size_t n = set.rows();
  const std::size_t k = set.dims();
  std::string out;
  out.reserve(kHeaderBytes + n * k * 4 + (set.has_labels() ? n * 4 : 0));
  out.append(kMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(n));
  put_u32(out, static_cast<std::uint32_t>(k));
  out.push_back(set.has_labels() ? '\1' : '\0');
  out.append(3, '\0');
  out.append(reinterpret_cast<const char*>(set.vectors().data()), n * k * sizeof(float));
  if (set.has_labels()) {
    for (Label l : *set.labels()) put_u32(out, static_cast<std::uint32_t>(l));
  }
  return out;
}

EmbeddingSet decode_emb1(const std::string& bytes, std::string name) {
  if (bytes.size() < kHeaderBytes) throw FormatError("truncated EMB1 header", bytes.size());
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad magic, expected \"EMB1\"", 0);
  const std::uint64_t n = get_u32(bytes, 4);
  const std::uint64_t k = get_u32(bytes, 8);
  const auto flag = static_cast<unsigned char>(bytes[12]);
  if (flag > 1) throw FormatError("label flag must be 0 or 1", 12);
  for (std::size_t i = 13; i < 16; ++i) {
    if (bytes[i] != '\0') throw FormatError("non-zero header padding", i);
  }
  if (n == 0 || k == 0) throw FormatError("EMB1 header declares an empty matrix", n == 0 ? 4 : 8);
  const std::uint64_t payload_end = kHeaderBytes + n * k * 4;
  const std::uint64_t label_end = payload_end + (flag ? n * 4 : 0);
  if (bytes.size() < label_end) throw FormatError("truncated EMB1 payload", bytes.size());
  if (bytes.size() > label_end) throw FormatError("trailing bytes after EMB1 payload", label_end);

  RowMatrixF m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  std::memcpy(m.data(), bytes.data() + kHeaderBytes, n * k * sizeof(float));
  std::optional<std::vector<Label>> labels;
  if (flag) {
    labels.emplace(n);
    for (std::size_t i = 0; i < n; ++i) (*labels)[i] = static_cast<Label>(get_u32(bytes, payload_end + 4 * i));
  }
  return EmbeddingSet(std::move(name), std::move(m), std::move(labels));
}

FileFormat format_from_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".csv" ? FileFormat::csv : FileFormat::binary;
}

EmbeddingSet load_embeddings(const std::filesystem::path& path, FileFormat format, const LoadOptions& options) {
  std::string bytes = read_all(path);
  std::string name = options.name.value_or(path.stem().string());
  if (format == FileFormat::binary) return decode_emb1(bytes, std::move(name));
  return decode_csv(bytes, std::move(name), options.csv_labeled);
}

void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& path, FileFormat format) {
  write_file_atomic(path, format == FileFormat::binary ? encode_emb1(set) : encode_csv(set));
}

std::map<Label, EmbeddingSet> split_by_label(const EmbeddingSet& set) {
  if (!set.has_labels()) {
    throw UsageError("embedding set '" + set.name() + "' has no labels; use k-means partitioning instead");
  }
  const auto& labels = *set.labels();
  std::map<Label, std::vector<std::size_t>> rows_of;
  for (std::size_t i = 0; i < labels.size(); ++i) rows_of[labels[i]].push_back(i);

  std::map<Label, EmbeddingSet> out;
  for (const auto& [label, idx] : rows_of) {
    RowMatrixF m(static_cast<Eigen::Index>(idx.size()), set.vectors().cols());
    for (std::size_t r = 0; r < idx.size(); ++r) m.row(static_cast<Eigen::Index>(r)) = set.vectors().row(static_cast<Eigen::Index>(idx[r]));
    out.emplace(label, EmbeddingSet(set.name() + "[" + std::to_string(label) + "]", std::move(m),
                                    std::vector<Label>(idx.size(), label)));
  }
  return out;
}

}  // namespace memguard
