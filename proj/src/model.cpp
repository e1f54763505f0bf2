#include "pnnlab/model.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace pnnlab {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kLr: return "lr";
    case ModelKind::kFm: return "fm";
    case ModelKind::kFnn: return "fnn";
    case ModelKind::kIpnn: return "ipnn";
    case ModelKind::kOpnn: return "opnn";
    case ModelKind::kPnnStar: return "pnnstar";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  for (auto kind : {ModelKind::kLr, ModelKind::kFm, ModelKind::kFnn, ModelKind::kIpnn,
                    ModelKind::kOpnn, ModelKind::kPnnStar}) {
    if (name == to_string(kind)) return kind;
  }
  throw std::invalid_argument("unsupported model kind '" + std::string(name) +
                              "'; supported kinds: lr, fm, fnn, ipnn, opnn, pnnstar");
}

std::string_view to_string(Fusion fusion) { return fusion == Fusion::kAdd ? "add" : "concat"; }

Fusion parse_fusion(std::string_view name) {
  if (name == "add") return Fusion::kAdd;
  if (name == "concat") return Fusion::kConcat;
  throw std::invalid_argument("unknown fusion '" + std::string(name) + "' (expected add or concat)");
}

bool is_network(ModelKind kind) { return kind != ModelKind::kLr && kind != ModelKind::kFm; }

void validate(const ModelConfig& c) {
  if (c.embedding_order < 1) throw std::invalid_argument("embedding order must be >= 1");
  if (c.d1 < 1 || c.d2 < 1) throw std::invalid_argument("hidden widths must be >= 1");
  if (c.hidden_layers < 1) throw std::invalid_argument("hidden_layers must be >= 1");
  if (c.k_order < 1) throw std::invalid_argument("k_order must be >= 1");
  if (!(c.embedding_init >= 0.0)) throw std::invalid_argument("embedding_init must be >= 0");
}

namespace {

PnnShape pnn_shape(const ModelConfig& c) {
  PnnShape s;
  s.order = c.embedding_order;
  s.d1 = c.d1;
  s.d2 = c.d2;
  s.hidden_layers = c.hidden_layers;
  s.k_order = c.k_order;
  s.activation = c.activation;
  s.fusion = c.fusion;
  switch (c.kind) {
    case ModelKind::kIpnn: s.variant = ProductVariant::kInner; break;
    case ModelKind::kOpnn: s.variant = ProductVariant::kOuter; break;
    case ModelKind::kPnnStar: s.variant = ProductVariant::kBoth; break;
    default: s.variant = ProductVariant::kNone; break;
  }
  return s;
}

void xavier(Mat& m, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (double& x : m.values()) x = rng.uniform(-bound, bound);
}

void small_uniform(Mat& m, double a, Rng& rng) {
  for (double& x : m.values()) x = rng.uniform(-a, a);
}

void init_head(MlpHead& head, Rng& rng) {
  for (auto& layer : head.hidden) xavier(layer.w, rng);
  xavier(head.out.w, rng);
}

void init_embedding(EmbeddingTable& t, double a, Rng& rng) {
  for (auto& m : t.fields) small_uniform(m, a, rng);
}

}  // namespace

Model zero_model(const FieldSchema& schema, const ModelConfig& config) {
  validate(config);
  Model model{config, schema, LrParams{}};
  switch (config.kind) {
    case ModelKind::kLr: model.params = lr_zeros(schema); break;
    case ModelKind::kFm: model.params = fm_zeros(schema, config.embedding_order); break;
    case ModelKind::kFnn:
      model.params = fnn_zeros(schema, config.embedding_order, config.d1, config.d2,
                               config.hidden_layers, config.activation);
      break;
    default: model.params = pnn_zeros(schema, pnn_shape(config)); break;
  }
  return model;
}

Model init_params(const FieldSchema& schema, const ModelConfig& config, Rng& rng) {
  Model model = zero_model(schema, config);
  const double emb = config.embedding_init;
  std::visit(
      [&](auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LrParams>) {
          xavier(p.w, rng);
        } else if constexpr (std::is_same_v<T, FmParams>) {
          xavier(p.w, rng);
          small_uniform(p.v, emb, rng);
        } else if constexpr (std::is_same_v<T, FnnParams>) {
          init_embedding(p.embedding, emb, rng);
          xavier(p.w1, rng);
          init_head(p.head, rng);
        } else {
          init_embedding(p.embedding, emb, rng);
          xavier(p.wz, rng);
          for (auto& term : p.terms) {
            if (auto* inner = std::get_if<InnerProductTerm>(&term)) xavier(inner->theta, rng);
            if (auto* outer = std::get_if<OuterProductTerm>(&term)) xavier(outer->wp, rng);
          }
          init_head(p.head, rng);
        }
      },
      model.params);
  return model;
}

ModelParams zeros_like(const ModelParams& params) {
  ModelParams out = params;
  for_each_block(out, [](const std::string&, Mat& m) { m.fill(0.0); });
  return out;
}

std::size_t parameter_count(const ModelParams& params) {
  std::size_t n = 0;
  for_each_block(params, [&](const std::string&, const Mat& m) { n += m.size(); });
  return n;
}

double predict(const Model& model, const SparseSample& s) {
  return std::visit(
      [&](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LrParams>) return lr_forward(p, s);
        else if constexpr (std::is_same_v<T, FmParams>) return fm_forward(p, s);
        else if constexpr (std::is_same_v<T, FnnParams>) return fnn_forward(p, s);
        else return pnn_forward(p, s);
      },
      model.params);
}

double accumulate_gradient(const Model& model, const SparseSample& s, const Dropout& dropout,
                           ModelParams& grad) {
  if (grad.index() != model.params.index()) throw std::invalid_argument("gradient kind mismatch");
  return std::visit(
      [&](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        auto& g = std::get<T>(grad);
        if constexpr (std::is_same_v<T, LrParams>) {
          const double y = lr_forward(p, s);
          lr_accumulate(p, s, y - s.label, g);
          return y;
        } else if constexpr (std::is_same_v<T, FmParams>) {
          const double y = fm_forward(p, s);
          fm_accumulate(p, s, y - s.label, g);
          return y;
        } else if constexpr (std::is_same_v<T, FnnParams>) {
          NetCache cache;
          const double y = fnn_forward(p, s, &cache, dropout);
          fnn_backward(p, s, s.label, cache, g);
          return y;
        } else {
          NetCache cache;
          const double y = pnn_forward(p, s, &cache, dropout);
          pnn_backward(p, s, s.label, cache, g);
          return y;
        }
      },
      model.params);
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr std::string_view kMagic = "pnnlab-v1";

void write_double(std::ostream& out, double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  out.write(buf, res.ptr - buf);
}

double parse_double(const std::string& tok) {
  double x = 0.0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), x);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw std::runtime_error("checkpoint: bad number '" + tok + "'");
  }
  return x;
}

std::size_t parse_size(const std::string& tok) {
  std::size_t x = 0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), x);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw std::runtime_error("checkpoint: bad count '" + tok + "'");
  }
  return x;
}

std::vector<std::string> tokens_of(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string t;
  while (ss >> t) out.push_back(std::move(t));
  return out;
}

bool next_line(std::istream& in, std::vector<std::string>& tokens) {
  std::string line;
  while (std::getline(in, line)) {
    tokens = tokens_of(line);
    if (!tokens.empty()) return true;
  }
  return false;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Model& model) {
  const auto& c = model.config;
  const bool net = is_network(c.kind);
  out << kMagic << ' ' << to_string(c.kind) << ' ' << model.schema.num_fields() << ' '
      << (c.kind == ModelKind::kLr ? 0 : c.embedding_order) << ' ' << (net ? c.d1 : 0) << ' '
      << (net ? c.d2 : 0) << ' ' << (net ? to_string(c.activation) : std::string_view("none"))
      << '\n';
  out << "fields";
  for (const auto& f : model.schema.fields()) out << ' ' << f.name << ' ' << f.cardinality;
  out << '\n';
  for_each_block(model.params, [&](const std::string& name, const Mat& m) {
    out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (std::size_t r = 0; r < m.rows(); ++r) {
      auto row = m.row(r);
      for (std::size_t j = 0; j < row.size(); ++j) {
        if (j) out << ' ';
        write_double(out, row[j]);
      }
      out << '\n';
    }
  });
}

void write_checkpoint(const std::string& path, const Model& model) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  write_checkpoint(out, model);
  if (!out) throw std::runtime_error("error writing checkpoint '" + path + "'");
}

Model read_checkpoint(std::istream& in) {
  std::vector<std::string> t;
  if (!next_line(in, t) || t.size() != 7 || t[0] != kMagic) {
    throw std::runtime_error("checkpoint: missing '" + std::string(kMagic) + "' header");
  }
  ModelConfig config;
  config.kind = parse_model_kind(t[1]);
  const std::size_t n_fields = parse_size(t[2]);
  const std::size_t m = parse_size(t[3]);
  const std::size_t d1 = parse_size(t[4]);
  const std::size_t d2 = parse_size(t[5]);
  if (is_network(config.kind)) {
    config.activation = parse_activation(t[6]);
    config.d1 = d1;
    config.d2 = d2;
  }
  if (config.kind != ModelKind::kLr) config.embedding_order = m;

  if (!next_line(in, t) || t[0] != "fields" || t.size() != 1 + 2 * n_fields) {
    throw std::runtime_error("checkpoint: bad fields line");
  }
  std::vector<Field> fields;
  for (std::size_t i = 0; i < n_fields; ++i) fields.push_back({t[1 + 2 * i], parse_size(t[2 + 2 * i])});
  FieldSchema schema(std::move(fields));

  std::map<std::string, Mat> blocks;
  while (next_line(in, t)) {
    if (t.size() != 3) throw std::runtime_error("checkpoint: bad block header '" + t[0] + "'");
    const std::string name = t[0];
    const std::size_t rows = parse_size(t[1]);
    const std::size_t cols = parse_size(t[2]);
    Mat mat(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      std::vector<std::string> vals;
      if (!next_line(in, vals) || vals.size() != cols) {
        throw std::runtime_error("checkpoint: block '" + name + "' row " + std::to_string(r) +
                                 " has the wrong number of values");
      }
      for (std::size_t j = 0; j < cols; ++j) mat(r, j) = parse_double(vals[j]);
    }
    if (!blocks.emplace(name, std::move(mat)).second) {
      throw std::runtime_error("checkpoint: duplicate block '" + name + "'");
    }
  }

  // Structure not in the header follows from block shapes.
  std::size_t extra_hidden = 0;
  for (const auto& [name, mat] : blocks) {
    if (name.rfind("head.w.", 0) == 0) ++extra_hidden;
  }
  config.hidden_layers = 1 + extra_hidden;
  if (auto it = blocks.find("inner.theta"); it != blocks.end() && n_fields > 0) {
    config.k_order = it->second.cols() / n_fields;
  }
  if (auto it = blocks.find("wz"); it != blocks.end() && config.kind == ModelKind::kPnnStar) {
    config.fusion = it->second.rows() == 2 * d1 ? Fusion::kConcat : Fusion::kAdd;
  }

  Model model = zero_model(schema, config);
  std::size_t used = 0;
  for_each_block(model.params, [&](const std::string& name, Mat& mat) {
    auto it = blocks.find(name);
    if (it == blocks.end()) throw std::runtime_error("checkpoint: missing block '" + name + "'");
    if (!it->second.same_shape(mat)) {
      throw std::runtime_error("checkpoint: block '" + name + "' has shape " +
                               it->second.shape_string() + ", expected " + mat.shape_string());
    }
    mat = std::move(it->second);
    ++used;
  });
  if (used != blocks.size()) throw std::runtime_error("checkpoint: unexpected extra blocks");
  return model;
}

Model read_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  return read_checkpoint(in);
}

}  // namespace pnnlab
