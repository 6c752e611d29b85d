#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace memguard {

using RowMatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Label = std::int32_t;

enum class FileFormat { binary, csv };

/// An N x K matrix of embedding vectors with optional per-row class labels.
///
/// Immutable after construction. The constructor enforces N >= 1, K >= 1,
/// finite entries, non-negative labels and one label per row.
class EmbeddingSet {
 public:
  EmbeddingSet(std::string name, RowMatrixF vectors, std::optional<std::vector<Label>> labels = std::nullopt);

  const std::string& name() const noexcept { return name_; }
  std::size_t rows() const noexcept { return static_cast<std::size_t>(vectors_.rows()); }
  std::size_t dims() const noexcept { return static_cast<std::size_t>(vectors_.cols()); }
  const RowMatrixF& vectors() const noexcept { return vectors_; }
  std::span<const float> row(std::size_t i) const {
    return {vectors_.data() + i * dims(), dims()};
  }

  bool has_labels() const noexcept { return labels_.has_value(); }
  const std::optional<std::vector<Label>>& labels() const noexcept { return labels_; }

  EmbeddingSet renamed(std::string name) const;

 private:
  std::string name_;
  RowMatrixF vectors_;
  std::optional<std::vector<Label>> labels_;
};

struct LoadOptions {
  // CSV only: treat the last column as an integer label.
  bool csv_labeled = false;
  // Defaults to the file stem.
  std::optional<std::string> name;
};

EmbeddingSet load_embeddings(const std::filesystem::path& path, FileFormat format, const LoadOptions& options = {});

// Writes to a temporary sibling and renames on success.
void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& path, FileFormat format);

// ".csv" (case-insensitive) selects csv, anything else the EMB1 binary format.
FileFormat format_from_extension(const std::filesystem::path& path);

EmbeddingSet decode_emb1(const std::string& bytes, std::string name);
std::string encode_emb1(const EmbeddingSet& set);

/// Partitions a labeled set into one set per label value, preserving row order.
std::map<Label, EmbeddingSet> split_by_label(const EmbeddingSet& set);

}  // namespace memguard
