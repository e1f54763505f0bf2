#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pnnlab/numkit.hpp"

namespace pnnlab {

struct Field {
  std::string name;
  std::size_t cardinality = 1;

  friend bool operator==(const Field&, const Field&) = default;
};

// Ordered categorical fields and their one-hot layout. Field i occupies
// [offset(i), offset(i) + cardinality) of the concatenated one-hot vector.
class FieldSchema {
 public:
  FieldSchema() = default;
  explicit FieldSchema(std::vector<Field> fields);

  std::size_t num_fields() const { return fields_.size(); }
  const Field& field(std::size_t i) const { return fields_.at(i); }
  const std::vector<Field>& fields() const { return fields_; }
  std::size_t cardinality(std::size_t i) const { return fields_[i].cardinality; }
  std::size_t offset(std::size_t i) const { return offsets_[i]; }
  std::size_t end(std::size_t i) const { return offsets_[i] + fields_[i].cardinality; }
  std::size_t one_hot_dim() const { return dim_; }

  friend bool operator==(const FieldSchema& a, const FieldSchema& b) {
    return a.fields_ == b.fields_;
  }

 private:
  std::vector<Field> fields_;
  std::vector<std::size_t> offsets_;
  std::size_t dim_ = 0;
};

struct SparseSample {
  std::vector<std::uint32_t> categories;  // one active category per field
  int label = 0;

  friend bool operator==(const SparseSample&, const SparseSample&) = default;
};

void validate_sample(const FieldSchema& schema, const SparseSample& sample);

struct Dataset {
  FieldSchema schema;
  std::vector<SparseSample> samples;
  double downsampling_ratio = 1.0;

  std::size_t size() const { return samples.size(); }
  double positive_rate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Category strings per field. The last index of every field is reserved for
// categories never seen while building the dictionary.
class CategoryDictionary {
 public:
  static constexpr std::string_view kUnknownToken = "__unk__";

  CategoryDictionary() = default;
  explicit CategoryDictionary(std::size_t num_fields) : names_(num_fields), index_(num_fields) {}

  std::size_t num_fields() const { return names_.size(); }
  // Registers a category; returns its index. Re-adding returns the existing index.
  std::uint32_t add(std::size_t field, const std::string& category);
  void set(std::size_t field, const std::string& category, std::uint32_t index);
  std::optional<std::uint32_t> find(std::size_t field, std::string_view category) const;
  // Indices without a registered string decode to kUnknownToken.
  std::string_view decode(std::size_t field, std::uint32_t index) const;
  std::size_t known_count(std::size_t field) const { return index_[field].size(); }

  friend bool operator==(const CategoryDictionary& a, const CategoryDictionary& b) {
    return a.names_ == b.names_;
  }

 private:
  std::vector<std::vector<std::string>> names_;
  std::vector<std::unordered_map<std::string, std::uint32_t>> index_;
};

struct Encoding {
  FieldSchema schema;
  CategoryDictionary dictionary;

  // Unseen strings map to the field's last index.
  std::uint32_t encode(std::size_t field, std::string_view category) const;
};

Encoding build_schema(const std::vector<std::vector<std::string>>& rows,
                      const std::vector<std::string>& field_names);

// Text dataset: "<label> <cat_0> ... <cat_N-1>" per line, '#' lines are comments.
Dataset parse_dataset(std::istream& in, const Encoding& encoding);
Dataset parse_dataset(const std::string& path, const Encoding& encoding);
void write_dataset(std::ostream& out, const Dataset& ds, const CategoryDictionary& dictionary);
void write_dataset(const std::string& path, const Dataset& ds, const CategoryDictionary& dictionary);

// Schema file: "<field_name> <cardinality>" lines followed by
// "<field_name> <category_string> <index>" dictionary lines.
Encoding read_schema(std::istream& in);
Encoding read_schema(const std::string& path);
void write_schema(std::ostream& out, const Encoding& encoding);
void write_schema(const std::string& path, const Encoding& encoding);

// Keeps every positive and each negative with probability w.
Dataset downsample_negatives(const Dataset& ds, double w, Rng& rng);

// Maps a CTR predicted on w-down-sampled data back to the original scale.
double recalibrate(double p, double w);

struct SynthConfig {
  std::size_t n_fields = 8;
  std::size_t cardinality = 10;
  std::size_t n_samples = 10000;
  double interaction_strength = 5.0;
  double additive_strength = 1.0;
  double bias = -1.0;
  std::uint64_t seed = 0;
};

struct SynthData {
  Encoding encoding;
  Dataset dataset;
  std::vector<double> true_probability;
};

inline constexpr std::size_t kSynthLatentDim = 4;

// Labels drawn from sigmoid(bias + a * sum_i u_i + s * sum_{i<j} <v_i, v_j>) with
// per-category u ~ N(0, 0.5^2) and v ~ N(0, 0.2^2 I_4).
SynthData synth_generate(const SynthConfig& config);

// First n samples and the remainder, sharing the schema.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, std::size_t n_first);

}  // namespace pnnlab
