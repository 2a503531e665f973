#include "novelkit/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace novelkit {

namespace {

Matrix uniform_matrix(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data) v = rng.uniform(-bound, bound);
  return m;
}

void affine(const Matrix& w, const std::vector<double>& b,
            std::span<const double> x, std::span<double> out) {
  for (std::size_t i = 0; i < w.rows; ++i) {
    double s = b[i];
    auto row = w.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) s += row[j] * x[j];
    out[i] = s;
  }
}

}  // namespace

void softmax(std::span<const double> logits, std::span<double> out) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= sum;
}

ModelGradients ModelGradients::zeros_like(const DualHeadModel& m) {
  ModelGradients g;
  g.trunk_w = Matrix(m.trunk_w.rows, m.trunk_w.cols);
  g.trunk_b.assign(m.trunk_b.size(), 0.0);
  g.head_l_w = Matrix(m.head_l_w.rows, m.head_l_w.cols);
  g.head_l_b.assign(m.head_l_b.size(), 0.0);
  g.head_u_w = Matrix(m.head_u_w.rows, m.head_u_w.cols);
  g.head_u_b.assign(m.head_u_b.size(), 0.0);
  return g;
}

void ModelGradients::check_finite() const {
  auto scan = [](const std::vector<double>& v) {
    for (double x : v)
      if (!std::isfinite(x))
        throw std::runtime_error("optimization error: non-finite gradient");
  };
  scan(trunk_w.data);
  scan(trunk_b);
  scan(head_l_w.data);
  scan(head_l_b);
  scan(head_u_w.data);
  scan(head_u_b);
}

DualHeadModel init_model(long long d_in, long long d_h, long long c_l,
                         long long c_u, std::uint64_t seed, bool identity_trunk) {
  if (d_in < 1 || d_h < 1 || c_l < 1 || c_u < 1)
    throw std::invalid_argument("init_model: all dimensions must be >= 1");
  if (identity_trunk && d_h != d_in)
    throw std::invalid_argument("init_model: identity trunk requires d_h == d_in");

  DualHeadModel m;
  m.identity_trunk = identity_trunk;
  m.d_in = d_in;
  m.d_h = d_h;
  m.class_count_labelled = c_l;
  m.class_count_unlabelled = c_u;

  Rng rng(Rng::mix(seed, stream::model_init));
  if (!identity_trunk) {
    m.trunk_w = uniform_matrix(static_cast<std::size_t>(d_h),
                               static_cast<std::size_t>(d_in),
                               1.0 / std::sqrt(static_cast<double>(d_in)), rng);
    m.trunk_b.assign(static_cast<std::size_t>(d_h), 0.0);
  }
  double hb = 1.0 / std::sqrt(static_cast<double>(d_h));
  m.head_l_w = uniform_matrix(static_cast<std::size_t>(c_l),
                              static_cast<std::size_t>(d_h), hb, rng);
  m.head_l_b.assign(static_cast<std::size_t>(c_l), 0.0);
  m.head_u_w = uniform_matrix(static_cast<std::size_t>(c_u),
                              static_cast<std::size_t>(d_h), hb, rng);
  m.head_u_b.assign(static_cast<std::size_t>(c_u), 0.0);
  return m;
}

ForwardResult forward(const DualHeadModel& model, std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(model.d_in))
    throw std::invalid_argument("forward: input dimension mismatch");
  for (double v : x)
    if (!std::isfinite(v))
      throw std::runtime_error("evaluation error: non-finite input");

  ForwardResult r;
  r.z.resize(static_cast<std::size_t>(model.d_h));
  if (model.identity_trunk) {
    std::copy(x.begin(), x.end(), r.z.begin());
  } else {
    affine(model.trunk_w, model.trunk_b, x, r.z);
    for (double& v : r.z) v = std::max(0.0, v);
  }
  std::vector<double> logits(static_cast<std::size_t>(model.head_l_out()));
  affine(model.head_l_w, model.head_l_b, r.z, logits);
  r.p_l.resize(logits.size());
  softmax(logits, r.p_l);

  logits.resize(static_cast<std::size_t>(model.class_count_unlabelled));
  affine(model.head_u_w, model.head_u_b, r.z, logits);
  r.p_u.resize(logits.size());
  softmax(logits, r.p_u);
  return r;
}

DualHeadModel extend_incremental(const DualHeadModel& model, std::uint64_t seed) {
  if (model.extended)
    throw std::runtime_error("extend_incremental: model already extended");
  DualHeadModel out = model;
  out.extended = true;
  std::size_t c_u = static_cast<std::size_t>(model.class_count_unlabelled);
  std::size_t d_h = static_cast<std::size_t>(model.d_h);
  Rng rng(Rng::mix(seed, stream::extend));
  Matrix fresh = uniform_matrix(c_u, d_h, 1.0 / std::sqrt(static_cast<double>(d_h)), rng);
  out.head_l_w = Matrix(model.head_l_w.rows + c_u, d_h);
  std::copy(model.head_l_w.data.begin(), model.head_l_w.data.end(),
            out.head_l_w.data.begin());
  std::copy(fresh.data.begin(), fresh.data.end(),
            out.head_l_w.data.begin() + static_cast<long>(model.head_l_w.size()));
  out.head_l_b = model.head_l_b;
  out.head_l_b.resize(model.head_l_b.size() + c_u, 0.0);
  return out;
}

// Checkpoint layout: "NVKC" magic, u64 little-endian manifest length, the
// JSON manifest, then each tensor as the dataio binary block (magic, n, d,
// has_labels=0, f64 payload) at the offset the manifest records.
namespace {

constexpr char kCkptMagic[4] = {'N', 'V', 'K', 'C'};

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

std::size_t tensor_block_size(const Matrix& m) { return 4 + 8 + 8 + 1 + 8 * m.size(); }

void write_tensor(std::ostream& out, const Matrix& m) {
  out.write("NVK1", 4);
  put_u64(out, m.rows);
  put_u64(out, m.cols);
  char hl = 0;
  out.write(&hl, 1);
  for (double v : m.data) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
  }
}

Matrix read_tensor(std::istream& in, std::size_t rows, std::size_t cols) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "NVK1", 4) != 0)
    throw std::runtime_error("checkpoint: bad tensor magic");
  std::uint64_t r = get_u64(in), c = get_u64(in);
  char hl;
  in.read(&hl, 1);
  if (r != rows || c != cols)
    throw std::runtime_error("checkpoint: tensor shape mismatch");
  Matrix m(rows, cols);
  for (double& v : m.data) {
    std::uint64_t bits = get_u64(in);
    std::memcpy(&v, &bits, 8);
  }
  return m;
}

Matrix as_matrix(const std::vector<double>& v) {
  Matrix m(1, v.size());
  m.data = v;
  return m;
}

}  // namespace

void save_model(const DualHeadModel& model, const std::string& path,
                const std::vector<long long>* novel_class_map) {
  using nlohmann::json;
  std::vector<std::pair<std::string, Matrix>> tensors;
  if (!model.identity_trunk) {
    tensors.emplace_back("trunk_w", model.trunk_w);
    tensors.emplace_back("trunk_b", as_matrix(model.trunk_b));
  }
  tensors.emplace_back("head_l_w", model.head_l_w);
  tensors.emplace_back("head_l_b", as_matrix(model.head_l_b));
  tensors.emplace_back("head_u_w", model.head_u_w);
  tensors.emplace_back("head_u_b", as_matrix(model.head_u_b));

  json manifest;
  manifest["format"] = "nvkc-1";
  manifest["identity_trunk"] = model.identity_trunk;
  manifest["d_in"] = model.d_in;
  manifest["d_h"] = model.d_h;
  manifest["class_count_labelled"] = model.class_count_labelled;
  manifest["class_count_unlabelled"] = model.class_count_unlabelled;
  manifest["extended"] = model.extended;
  if (novel_class_map) manifest["novel_class_map"] = *novel_class_map;

  json list = json::array();
  std::size_t offset = 0;
  for (auto& [name, t] : tensors) {
    list.push_back({{"name", name},
                    {"rows", t.rows},
                    {"cols", t.cols},
                    {"offset", offset}});
    offset += tensor_block_size(t);
  }
  manifest["tensors"] = list;
  std::string mtext = manifest.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write: " + path);
  out.write(kCkptMagic, 4);
  put_u64(out, mtext.size());
  out.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
  for (auto& [name, t] : tensors) write_tensor(out, t);
  if (!out) throw std::runtime_error("write failed: " + path);
}

DualHeadModel load_model(const std::string& path,
                         std::vector<long long>* novel_class_map) {
  using nlohmann::json;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCkptMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  std::uint64_t mlen = get_u64(in);
  std::string mtext(mlen, '\0');
  in.read(mtext.data(), static_cast<std::streamsize>(mlen));
  if (!in) throw std::runtime_error("checkpoint: truncated manifest in " + path);
  json manifest = json::parse(mtext);

  DualHeadModel m;
  m.identity_trunk = manifest.at("identity_trunk").get<bool>();
  m.d_in = manifest.at("d_in").get<long long>();
  m.d_h = manifest.at("d_h").get<long long>();
  m.class_count_labelled = manifest.at("class_count_labelled").get<long long>();
  m.class_count_unlabelled = manifest.at("class_count_unlabelled").get<long long>();
  m.extended = manifest.at("extended").get<bool>();
  if (novel_class_map) {
    novel_class_map->clear();
    if (manifest.contains("novel_class_map"))
      *novel_class_map = manifest["novel_class_map"].get<std::vector<long long>>();
  }

  auto expect = [&](const std::string& name) -> std::pair<std::size_t, std::size_t> {
    std::size_t d_h = static_cast<std::size_t>(m.d_h);
    if (name == "trunk_w")
      return {d_h, static_cast<std::size_t>(m.d_in)};
    if (name == "trunk_b") return {1, d_h};
    if (name == "head_l_w")
      return {static_cast<std::size_t>(m.head_l_out()), d_h};
    if (name == "head_l_b") return {1, static_cast<std::size_t>(m.head_l_out())};
    if (name == "head_u_w")
      return {static_cast<std::size_t>(m.class_count_unlabelled), d_h};
    if (name == "head_u_b")
      return {1, static_cast<std::size_t>(m.class_count_unlabelled)};
    throw std::runtime_error("checkpoint: unknown tensor " + name);
  };

  for (const auto& entry : manifest.at("tensors")) {
    std::string name = entry.at("name").get<std::string>();
    auto [rows, cols] = expect(name);
    Matrix t = read_tensor(in, rows, cols);
    if (name == "trunk_w") m.trunk_w = std::move(t);
    else if (name == "trunk_b") m.trunk_b = std::move(t.data);
    else if (name == "head_l_w") m.head_l_w = std::move(t);
    else if (name == "head_l_b") m.head_l_b = std::move(t.data);
    else if (name == "head_u_w") m.head_u_w = std::move(t);
    else if (name == "head_u_b") m.head_u_b = std::move(t.data);
  }
  if (!in) throw std::runtime_error("checkpoint: truncated tensors in " + path);
  return m;
}

}  // namespace novelkit
