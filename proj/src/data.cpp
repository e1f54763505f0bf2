#include "pnnlab/data.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace pnnlab {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> tokens;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) tokens.push_back(std::move(tok));
  return tokens;
}

bool is_blank_or_comment(const std::string& line) {
  for (char c : line) {
    if (c == '#') return true;
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

std::size_t parse_count(const std::string& tok, const std::string& what) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(tok, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != tok.size() || tok.empty() || tok[0] == '-') {
    throw std::runtime_error("bad " + what + " '" + tok + "'");
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

FieldSchema::FieldSchema(std::vector<Field> fields) : fields_(std::move(fields)) {
  if (fields_.empty()) throw std::invalid_argument("FieldSchema: at least one field required");
  std::unordered_set<std::string> seen;
  offsets_.reserve(fields_.size());
  for (const auto& f : fields_) {
    if (f.cardinality < 1) {
      throw std::invalid_argument("FieldSchema: field '" + f.name + "' has cardinality 0");
    }
    if (!seen.insert(f.name).second) {
      throw std::invalid_argument("FieldSchema: duplicate field name '" + f.name + "'");
    }
    offsets_.push_back(dim_);
    dim_ += f.cardinality;
  }
}

void validate_sample(const FieldSchema& schema, const SparseSample& sample) {
  if (sample.categories.size() != schema.num_fields()) {
    throw std::invalid_argument("sample has " + std::to_string(sample.categories.size()) +
                                " categories, schema has " +
                                std::to_string(schema.num_fields()) + " fields");
  }
  if (sample.label != 0 && sample.label != 1) {
    throw std::invalid_argument("sample label must be 0 or 1, got " +
                                std::to_string(sample.label));
  }
  for (std::size_t i = 0; i < sample.categories.size(); ++i) {
    if (sample.categories[i] >= schema.cardinality(i)) {
      throw std::out_of_range("category " + std::to_string(sample.categories[i]) +
                              " out of range for field '" + schema.field(i).name +
                              "' (cardinality " + std::to_string(schema.cardinality(i)) + ")");
    }
  }
}

double Dataset::positive_rate() const {
  if (samples.empty()) return 0.0;
  std::size_t pos = 0;
  for (const auto& s : samples) pos += static_cast<std::size_t>(s.label);
  return static_cast<double>(pos) / static_cast<double>(samples.size());
}

std::uint32_t CategoryDictionary::add(std::size_t field, const std::string& category) {
  if (category == kUnknownToken) {
    throw std::invalid_argument("category string '" + category + "' is reserved");
  }
  auto& idx = index_.at(field);
  auto it = idx.find(category);
  if (it != idx.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(names_[field].size());
  names_[field].push_back(category);
  idx.emplace(category, id);
  return id;
}

void CategoryDictionary::set(std::size_t field, const std::string& category, std::uint32_t index) {
  auto& names = names_.at(field);
  if (index != names.size()) {
    throw std::runtime_error("dictionary indices for field " + std::to_string(field) +
                             " must be dense and ascending, got " + std::to_string(index) +
                             " after " + std::to_string(names.size()) + " entries");
  }
  if (index_[field].count(category) != 0) {
    throw std::runtime_error("duplicate dictionary category '" + category + "'");
  }
  add(field, category);
}

std::optional<std::uint32_t> CategoryDictionary::find(std::size_t field,
                                                       std::string_view category) const {
  const auto& idx = index_.at(field);
  auto it = idx.find(std::string(category));
  if (it == idx.end()) return std::nullopt;
  return it->second;
}

std::uint32_t Encoding::encode(std::size_t field, std::string_view category) const {
  if (auto idx = dictionary.find(field, category)) return *idx;
  return static_cast<std::uint32_t>(schema.cardinality(field) - 1);
}

std::string_view CategoryDictionary::decode(std::size_t field, std::uint32_t index) const {
  const auto& names = names_.at(field);
  return index < names.size() ? std::string_view(names[index]) : kUnknownToken;
}

Encoding build_schema(const std::vector<std::vector<std::string>>& rows,
                      const std::vector<std::string>& field_names) {
  if (rows.empty()) throw std::invalid_argument("build_schema: no rows");
  const std::size_t n = field_names.size();
  CategoryDictionary dict(n);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != n) {
      throw std::invalid_argument("build_schema: row " + std::to_string(r) + " has " +
                                  std::to_string(rows[r].size()) + " fields, expected " +
                                  std::to_string(n));
    }
    for (std::size_t i = 0; i < n; ++i) dict.add(i, rows[r][i]);
  }
  std::vector<Field> fields;
  fields.reserve(n);
  for (std::size_t i = 0; i < n; ++i) fields.push_back({field_names[i], dict.known_count(i) + 1});
  return {FieldSchema(std::move(fields)), std::move(dict)};
}

Dataset parse_dataset(std::istream& in, const Encoding& encoding) {
  const auto& schema = encoding.schema;
  Dataset ds{schema, {}, 1.0};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank_or_comment(line)) continue;
    auto tokens = split_ws(line);
    if (tokens.size() != schema.num_fields() + 1) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": expected " +
                               std::to_string(schema.num_fields() + 1) + " tokens, got " +
                               std::to_string(tokens.size()));
    }
    SparseSample s;
    if (tokens[0] == "0") {
      s.label = 0;
    } else if (tokens[0] == "1") {
      s.label = 1;
    } else {
      throw std::runtime_error("line " + std::to_string(line_no) + ": label must be 0 or 1, got '" +
                               tokens[0] + "'");
    }
    s.categories.reserve(schema.num_fields());
    for (std::size_t i = 0; i < schema.num_fields(); ++i) {
      s.categories.push_back(encoding.encode(i, tokens[i + 1]));
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

Dataset parse_dataset(const std::string& path, const Encoding& encoding) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file '" + path + "'");
  return parse_dataset(in, encoding);
}

void write_dataset(std::ostream& out, const Dataset& ds, const CategoryDictionary& dictionary) {
  for (const auto& s : ds.samples) {
    out << s.label;
    for (std::size_t i = 0; i < s.categories.size(); ++i) {
      out << ' ' << dictionary.decode(i, s.categories[i]);
    }
    out << '\n';
  }
}

void write_dataset(const std::string& path, const Dataset& ds, const CategoryDictionary& dictionary) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset file '" + path + "'");
  write_dataset(out, ds, dictionary);
  if (!out) throw std::runtime_error("error writing dataset file '" + path + "'");
}

Encoding read_schema(std::istream& in) {
  std::vector<Field> fields;
  std::vector<std::vector<std::string>> dict_lines;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank_or_comment(line)) continue;
    auto tokens = split_ws(line);
    try {
      if (tokens.size() == 2) {
        if (!dict_lines.empty()) throw std::runtime_error("field line after dictionary lines");
        fields.push_back({tokens[0], parse_count(tokens[1], "cardinality")});
      } else if (tokens.size() == 3) {
        dict_lines.push_back(std::move(tokens));
      } else {
        throw std::runtime_error("expected 2 or 3 tokens");
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("schema line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  FieldSchema schema(fields);
  CategoryDictionary dict(schema.num_fields());
  for (const auto& tokens : dict_lines) {
    std::size_t field = schema.num_fields();
    for (std::size_t i = 0; i < schema.num_fields(); ++i) {
      if (schema.field(i).name == tokens[0]) field = i;
    }
    if (field == schema.num_fields()) {
      throw std::runtime_error("dictionary entry for unknown field '" + tokens[0] + "'");
    }
    const auto index = parse_count(tokens[2], "category index");
    if (index + 1 >= schema.cardinality(field)) {
      throw std::runtime_error("dictionary index " + tokens[2] + " leaves no unknown slot in field '" +
                               tokens[0] + "'");
    }
    dict.set(field, tokens[1], static_cast<std::uint32_t>(index));
  }
  return {std::move(schema), std::move(dict)};
}

Encoding read_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open schema file '" + path + "'");
  return read_schema(in);
}

void write_schema(std::ostream& out, const Encoding& encoding) {
  const auto& schema = encoding.schema;
  for (const auto& f : schema.fields()) out << f.name << ' ' << f.cardinality << '\n';
  for (std::size_t i = 0; i < schema.num_fields(); ++i) {
    for (std::uint32_t c = 0; c < encoding.dictionary.known_count(i); ++c) {
      out << schema.field(i).name << ' ' << encoding.dictionary.decode(i, c) << ' ' << c << '\n';
    }
  }
}

void write_schema(const std::string& path, const Encoding& encoding) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write schema file '" + path + "'");
  write_schema(out, encoding);
  if (!out) throw std::runtime_error("error writing schema file '" + path + "'");
}

Dataset downsample_negatives(const Dataset& ds, double w, Rng& rng) {
  if (!(w > 0.0 && w <= 1.0)) {
    throw std::invalid_argument("downsampling ratio must be in (0, 1], got " + std::to_string(w));
  }
  Dataset out{ds.schema, {}, w};
  out.samples.reserve(ds.samples.size());
  for (const auto& s : ds.samples) {
    // w == 1 keeps every sample without consuming randomness.
    if (s.label == 1 || w == 1.0 || rng.bernoulli(w)) out.samples.push_back(s);
  }
  return out;
}

double recalibrate(double p, double w) {
  if (!(w > 0.0 && w <= 1.0)) {
    throw std::invalid_argument("downsampling ratio must be in (0, 1], got " + std::to_string(w));
  }
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("probability must be in [0, 1], got " + std::to_string(p));
  }
  if (w == 1.0) return p;
  return p / (p + (1.0 - p) / w);
}

SynthData synth_generate(const SynthConfig& config) {
  if (config.n_fields < 2) throw std::invalid_argument("synth: n_fields must be >= 2");
  if (config.cardinality < 2) throw std::invalid_argument("synth: cardinality must be >= 2");
  if (config.n_samples < 1) throw std::invalid_argument("synth: n_samples must be >= 1");
  if (!std::isfinite(config.interaction_strength) || !std::isfinite(config.additive_strength) ||
      !std::isfinite(config.bias)) {
    throw std::invalid_argument("synth: strengths and bias must be finite");
  }

  const std::size_t n = config.n_fields;
  const std::size_t card = config.cardinality;
  Rng rng(config.seed);

  std::vector<Field> fields;
  CategoryDictionary dict(n);
  for (std::size_t i = 0; i < n; ++i) {
    fields.push_back({"f" + std::to_string(i), card + 1});
    for (std::size_t c = 0; c < card; ++c) dict.add(i, std::to_string(c));
  }
  FieldSchema schema(std::move(fields));

  // Latent ground truth, drawn before any sample so it depends on the seed only.
  std::vector<double> additive(n * card);
  for (double& u : additive) u = 0.5 * rng.normal();
  std::vector<double> latent(n * card * kSynthLatentDim);
  for (double& v : latent) v = 0.2 * rng.normal();
  // Zero-mean latents per field, so pairwise terms carry no marginal signal.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < kSynthLatentDim; ++d) {
      double mean = 0.0;
      for (std::size_t c = 0; c < card; ++c) mean += latent[(i * card + c) * kSynthLatentDim + d];
      mean /= static_cast<double>(card);
      for (std::size_t c = 0; c < card; ++c) latent[(i * card + c) * kSynthLatentDim + d] -= mean;
    }
  }

  SynthData out{{schema, dict}, {schema, {}, 1.0}, {}};
  out.dataset.samples.reserve(config.n_samples);
  out.true_probability.reserve(config.n_samples);
  std::vector<double> sum(kSynthLatentDim);
  for (std::size_t s = 0; s < config.n_samples; ++s) {
    SparseSample sample;
    sample.categories.resize(n);
    for (auto& c : sample.categories) c = static_cast<std::uint32_t>(rng.index(card));

    double additive_sum = 0.0;
    double pairwise = 0.0;
    std::fill(sum.begin(), sum.end(), 0.0);
    double sq_norms = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t id = i * card + sample.categories[i];
      additive_sum += additive[id];
      for (std::size_t d = 0; d < kSynthLatentDim; ++d) {
        const double v = latent[id * kSynthLatentDim + d];
        sum[d] += v;
        sq_norms += v * v;
      }
    }
    for (double x : sum) pairwise += x * x;
    pairwise = 0.5 * (pairwise - sq_norms);

    const double p = sigmoid(config.bias + config.additive_strength * additive_sum +
                             config.interaction_strength * pairwise);
    sample.label = rng.bernoulli(p) ? 1 : 0;
    out.dataset.samples.push_back(std::move(sample));
    out.true_probability.push_back(p);
  }
  return out;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, std::size_t n_first) {
  n_first = std::min(n_first, ds.samples.size());
  Dataset a{ds.schema, {ds.samples.begin(), ds.samples.begin() + static_cast<std::ptrdiff_t>(n_first)},
            ds.downsampling_ratio};
  Dataset b{ds.schema, {ds.samples.begin() + static_cast<std::ptrdiff_t>(n_first), ds.samples.end()},
            ds.downsampling_ratio};
  return {std::move(a), std::move(b)};
}

}  // namespace pnnlab
