#include "novelkit/dataio.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace novelkit {

namespace {

constexpr char kMagic[4] = {'N', 'V', 'K', '1'};

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

void put_f64(std::ostream& out, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  put_u64(out, v);
}

double get_f64(std::istream& in) {
  std::uint64_t v = get_u64(in);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

void put_i64(std::ostream& out, long long v) {
  put_u64(out, static_cast<std::uint64_t>(v));
}

long long get_i64(std::istream& in) {
  return static_cast<long long>(get_u64(in));
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_double(const std::string& tok, std::size_t line_no) {
  double v;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    throw std::runtime_error("load error: bad numeric value '" + tok +
                             "' at row " + std::to_string(line_no));
  return v;
}

long long parse_int(const std::string& tok, std::size_t line_no) {
  long long v;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    throw std::runtime_error("load error: bad integer '" + tok + "' at row " +
                             std::to_string(line_no));
  return v;
}

EmbeddingDataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("load error: empty file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto head = split_commas(line);
  if (head.size() != 4 || head[0] != "d" || head[2] != "labels")
    throw std::runtime_error("load error: malformed header in " + path);
  long long d = parse_int(head[1], 1);
  long long has_labels = parse_int(head[3], 1);
  if (d < 1 || (has_labels != 0 && has_labels != 1))
    throw std::runtime_error("load error: malformed header in " + path);

  std::vector<double> feat;
  std::vector<long long> labels;
  std::size_t line_no = 1;
  std::size_t expect = static_cast<std::size_t>(d) + (has_labels ? 1 : 0);
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto toks = split_commas(line);
    if (toks.size() != expect)
      throw std::runtime_error("load error: ragged row at row " +
                               std::to_string(line_no) + " (got " +
                               std::to_string(toks.size()) + " fields, want " +
                               std::to_string(expect) + ")");
    for (long long j = 0; j < d; ++j)
      feat.push_back(parse_double(toks[static_cast<std::size_t>(j)], line_no));
    if (has_labels) {
      long long y = parse_int(toks.back(), line_no);
      if (y < -1)
        throw std::runtime_error("load error: label out of range at row " +
                                 std::to_string(line_no));
      labels.push_back(y);
    } else {
      labels.push_back(-1);
    }
  }
  std::size_t n = labels.size();
  if (n == 0) throw std::runtime_error("load error: empty dataset: " + path);

  EmbeddingDataset ds;
  ds.features.rows = n;
  ds.features.cols = static_cast<std::size_t>(d);
  ds.features.data = std::move(feat);
  ds.labels = std::move(labels);
  ds.has_labels = has_labels == 1;
  long long maxl = -1;
  for (long long y : ds.labels) maxl = std::max(maxl, y);
  ds.class_count_labelled = maxl + 1;
  ds.validate();
  return ds;
}

void save_csv(const EmbeddingDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write: " + path);
  out << "d," << ds.dim() << ",labels," << (ds.has_labels ? 1 : 0) << "\n";
  char buf[32];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto row = ds.features.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) {
      // %.17g round-trips doubles exactly
      std::snprintf(buf, sizeof buf, "%.17g", row[j]);
      if (j) out << ',';
      out << buf;
    }
    if (ds.has_labels) out << ',' << ds.labels[i];
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

EmbeddingDataset load_bin(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("load error: bad magic in " + path);
  std::uint64_t n = get_u64(in);
  std::uint64_t d = get_u64(in);
  char hl = 0;
  in.read(&hl, 1);
  if (!in) throw std::runtime_error("load error: truncated header in " + path);
  if (n == 0) throw std::runtime_error("load error: empty dataset: " + path);
  if (d == 0) throw std::runtime_error("load error: zero dimension in " + path);

  EmbeddingDataset ds;
  ds.features = Matrix(n, d);
  for (std::size_t i = 0; i < n * d; ++i) ds.features.data[i] = get_f64(in);
  ds.has_labels = hl != 0;
  ds.labels.assign(n, -1);
  if (ds.has_labels) {
    for (std::size_t i = 0; i < n; ++i) {
      long long y = get_i64(in);
      if (y < -1)
        throw std::runtime_error("load error: label out of range at row " +
                                 std::to_string(i + 1));
      ds.labels[i] = y;
    }
  }
  if (!in) throw std::runtime_error("load error: truncated data in " + path);
  long long maxl = -1;
  for (long long y : ds.labels) maxl = std::max(maxl, y);
  ds.class_count_labelled = maxl + 1;
  ds.validate();
  return ds;
}

void save_bin(const EmbeddingDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write: " + path);
  out.write(kMagic, 4);
  put_u64(out, ds.size());
  put_u64(out, ds.dim());
  char hl = ds.has_labels ? 1 : 0;
  out.write(&hl, 1);
  for (double v : ds.features.data) put_f64(out, v);
  if (ds.has_labels)
    for (long long y : ds.labels) put_i64(out, y);
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace

FileFormat format_from_path(const std::string& path) {
  auto pos = path.rfind('.');
  std::string ext = pos == std::string::npos ? "" : path.substr(pos);
  return ext == ".csv" ? FileFormat::csv : FileFormat::bin;
}

bool EmbeddingDataset::any_label() const {
  for (long long y : labels)
    if (y >= 0) return true;
  return false;
}

EmbeddingDataset EmbeddingDataset::without_labels() const {
  EmbeddingDataset out = *this;
  std::fill(out.labels.begin(), out.labels.end(), -1);
  return out;
}

void EmbeddingDataset::validate() const {
  if (features.rows == 0 || features.cols == 0)
    throw std::runtime_error("dataset is empty");
  if (labels.size() != features.rows)
    throw std::runtime_error("label count does not match row count");
  long long declared = -1;
  if (class_count_labelled > 0 && class_count_unlabelled_hint)
    declared = class_count_labelled + *class_count_unlabelled_hint;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < -1)
      throw std::runtime_error("label out of range at row " +
                               std::to_string(i + 1));
    if (declared >= 0 && labels[i] >= declared)
      throw std::runtime_error("label out of range at row " +
                               std::to_string(i + 1));
  }
}

EmbeddingDataset load_dataset(const std::string& path, FileFormat format) {
  return format == FileFormat::csv ? load_csv(path) : load_bin(path);
}

void save_dataset(const EmbeddingDataset& ds, const std::string& path,
                  FileFormat format) {
  if (format == FileFormat::csv)
    save_csv(ds, path);
  else
    save_bin(ds, path);
}

SynthResult synth_mixture(const SynthSpec& spec) {
  if (spec.class_count_labelled < 1 || spec.class_count_unlabelled < 1 ||
      spec.points_per_class < 1 || spec.dim < 1)
    throw std::invalid_argument("synth_mixture: all counts must be >= 1");
  if (spec.separation <= 0 || spec.cluster_std <= 0 || spec.box_scale <= 0)
    throw std::invalid_argument(
        "synth_mixture: separation, cluster_std and box_scale must be > 0");

  const long long total = spec.class_count_labelled + spec.class_count_unlabelled;
  const std::size_t d = static_cast<std::size_t>(spec.dim);
  const double min_dist = spec.separation * spec.cluster_std;
  const double side = spec.box_scale * min_dist *
                      std::pow(static_cast<double>(total), 1.0 / spec.dim);

  Rng rng(Rng::mix(spec.seed, stream::synth));
  Matrix means(total, d);
  std::vector<double> cand(d);
  long long placed = 0;
  int retries = 0;
  while (placed < total) {
    for (std::size_t j = 0; j < d; ++j) cand[j] = rng.uniform(-side / 2, side / 2);
    bool ok = true;
    for (long long m = 0; m < placed && ok; ++m)
      ok = squared_distance(cand, means.row(m)) >= min_dist * min_dist;
    if (ok) {
      std::copy(cand.begin(), cand.end(), means.row(placed).begin());
      ++placed;
    } else if (++retries > 1000) {
      throw std::runtime_error(
          "synth_mixture: could not place cluster means at the required "
          "separation within the retry budget; raise box_scale or lower "
          "separation");
    }
  }

  auto draw = [&](long long first_class, long long n_classes) {
    EmbeddingDataset ds;
    std::size_t n = static_cast<std::size_t>(n_classes * spec.points_per_class);
    ds.features = Matrix(n, d);
    ds.labels.resize(n);
    std::size_t r = 0;
    for (long long c = first_class; c < first_class + n_classes; ++c) {
      for (long long p = 0; p < spec.points_per_class; ++p, ++r) {
        auto row = ds.features.row(r);
        auto mean = means.row(static_cast<std::size_t>(c));
        for (std::size_t j = 0; j < d; ++j)
          row[j] = mean[j] + spec.cluster_std * rng.normal();
        ds.labels[r] = c;
      }
    }
    ds.class_count_labelled = spec.class_count_labelled;
    ds.class_count_unlabelled_hint = spec.class_count_unlabelled;
    ds.has_labels = true;
    return ds;
  };

  SynthResult out;
  out.labelled = draw(0, spec.class_count_labelled);
  out.unlabelled = draw(spec.class_count_labelled, spec.class_count_unlabelled);
  out.test = draw(0, total);
  return out;
}

ProbeSplit split_probe(const EmbeddingDataset& labelled,
                       long long probe_class_count, double anchor_ratio,
                       std::uint64_t seed) {
  long long cl = labelled.class_count_labelled;
  if (cl < 2) throw std::invalid_argument("split_probe: need >= 2 labelled classes");
  if (probe_class_count < 1 || probe_class_count >= cl)
    throw std::invalid_argument(
        "split_probe: probe_class_count must be in [1, C^l)");
  if (anchor_ratio <= 0.0 || anchor_ratio >= 1.0)
    throw std::invalid_argument("split_probe: anchor_ratio must be in (0, 1)");

  long long n_anchor = std::llround(anchor_ratio * static_cast<double>(probe_class_count));
  long long n_valid = probe_class_count - n_anchor;
  if (n_anchor < 1 || n_valid < 1)
    throw std::invalid_argument(
        "split_probe: probe set too small to yield nonempty anchor and "
        "validation sets at this ratio");

  std::vector<long long> ids(static_cast<std::size_t>(cl));
  for (long long c = 0; c < cl; ++c) ids[static_cast<std::size_t>(c)] = c;
  Rng rng(Rng::mix(seed, stream::probe_split));
  rng.shuffle(ids);

  ProbeSplit split;
  split.anchor_probe.assign(ids.begin(), ids.begin() + n_anchor);
  split.validation_probe.assign(ids.begin() + n_anchor,
                                ids.begin() + probe_class_count);
  split.train_classes.assign(ids.begin() + probe_class_count, ids.end());
  std::sort(split.anchor_probe.begin(), split.anchor_probe.end());
  std::sort(split.validation_probe.begin(), split.validation_probe.end());
  std::sort(split.train_classes.begin(), split.train_classes.end());
  return split;
}

std::vector<long long> load_label_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::vector<long long> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    out.push_back(parse_int(line, line_no));
  }
  if (out.empty()) throw std::runtime_error("load error: empty label file: " + path);
  return out;
}

void save_label_file(const std::vector<long long>& labels,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write: " + path);
  for (long long y : labels) out << y << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace novelkit
