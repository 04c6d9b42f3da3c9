#include "cfaudit/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <vector>

#include "cfaudit/counterfactual.hpp"
#include "cfaudit/error.hpp"
#include "cfaudit/random.hpp"

namespace cfaudit {

void Dataset::validate() const {
  if (t.rows() != y.rows()) throw Error(Errc::InvalidArgument, "dataset t/y row counts differ");
  if (!t.allFinite() || !y.allFinite()) throw Error(Errc::InvalidArgument, "dataset has non-finite entries");
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.seed = seed;
  out.t.resize(static_cast<Eigen::Index>(rows.size()), t.cols());
  out.y.resize(static_cast<Eigen::Index>(rows.size()), y.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = static_cast<Eigen::Index>(rows[i]);
    out.t.row(static_cast<Eigen::Index>(i)) = t.row(src);
    out.y.row(static_cast<Eigen::Index>(i)) = y.row(src);
  }
  return out;
}

DatasetSplit split_dataset(const Dataset& data, double holdout_fraction, std::uint64_t seed) {
  if (holdout_fraction <= 0.0 || holdout_fraction >= 1.0) {
    throw Error(Errc::InvalidArgument, "holdout fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = make_rng(seed, 0x5411);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_hold = static_cast<std::size_t>(std::llround(static_cast<double>(data.size()) * holdout_fraction));
  if (n_hold == 0 || n_hold >= data.size()) throw Error(Errc::TooFewSamples, "dataset too small to split");
  std::span<const std::size_t> all(idx);
  DatasetSplit split{data.subset(all.subspan(n_hold)), data.subset(all.first(n_hold))};
  return split;
}

std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc()) throw Error(Errc::IoError, "failed to format a double");
  return std::string(buf, ptr);
}

std::string dataset_to_csv(const Dataset& data) {
  data.validate();
  std::string out;
  for (Eigen::Index j = 0; j < data.t.cols(); ++j) out += "t_" + std::to_string(j) + ",";
  for (Eigen::Index j = 0; j < data.y.cols(); ++j) {
    out += "y_" + std::to_string(j);
    out += (j + 1 < data.y.cols()) ? "," : "\n";
  }
  for (Eigen::Index i = 0; i < data.t.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.t.cols(); ++j) {
      out += format_double(data.t(i, j));
      out += ',';
    }
    for (Eigen::Index j = 0; j < data.y.cols(); ++j) {
      out += format_double(data.y(i, j));
      out += (j + 1 < data.y.cols()) ? ',' : '\n';
    }
  }
  return out;
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(std::string_view s, std::size_t line_no) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(Errc::IoError, "bad number '" + std::string(s) + "' on line " + std::to_string(line_no));
  }
  return v;
}

}  // namespace

Dataset dataset_from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw Error(Errc::IoError, "empty dataset file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_commas(line);
  Eigen::Index t_cols = 0;
  Eigen::Index y_cols = 0;
  for (std::string_view h : header) {
    if (h == "t_" + std::to_string(t_cols) && y_cols == 0) {
      ++t_cols;
    } else if (h == "y_" + std::to_string(y_cols)) {
      ++y_cols;
    } else {
      throw Error(Errc::IoError, "unexpected CSV header column '" + std::string(h) + "'");
    }
  }
  if (y_cols == 0) throw Error(Errc::IoError, "CSV header has no y columns");

  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_commas(line);
    if (static_cast<Eigen::Index>(fields.size()) != t_cols + y_cols) {
      throw Error(Errc::IoError, "wrong field count on line " + std::to_string(line_no));
    }
    for (std::string_view f : fields) values.push_back(parse_double(f, line_no));
    ++rows;
  }
  Dataset d;
  d.t.resize(static_cast<Eigen::Index>(rows), t_cols);
  d.y.resize(static_cast<Eigen::Index>(rows), y_cols);
  const Eigen::Index width = t_cols + y_cols;
  for (std::size_t i = 0; i < rows; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < t_cols; ++j) d.t(r, j) = values[i * static_cast<std::size_t>(width) + static_cast<std::size_t>(j)];
    for (Eigen::Index j = 0; j < y_cols; ++j) {
      d.y(r, j) = values[i * static_cast<std::size_t>(width) + static_cast<std::size_t>(t_cols + j)];
    }
  }
  d.validate();
  return d;
}

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(Errc::IoError, "cannot write " + path.string());
  os << dataset_to_csv(data);
  if (!os) throw Error(Errc::IoError, "write failed for " + path.string());
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::IoError, "cannot read " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return dataset_from_csv(ss.str());
}

QueryBatch to_batch(const std::vector<CounterfactualQuery>& queries) {
  QueryBatch b;
  if (queries.empty()) return b;
  const auto n = static_cast<Eigen::Index>(queries.size());
  b.evidence_t.resize(n, static_cast<Eigen::Index>(queries[0].evidence_t.size()));
  b.evidence_y.resize(n, static_cast<Eigen::Index>(queries[0].evidence_y.size()));
  b.intervention_t.resize(n, static_cast<Eigen::Index>(queries[0].intervention_t.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& q = queries[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(q.evidence_t.size()) != b.evidence_t.cols() ||
        static_cast<Eigen::Index>(q.evidence_y.size()) != b.evidence_y.cols() ||
        static_cast<Eigen::Index>(q.intervention_t.size()) != b.intervention_t.cols()) {
      throw Error(Errc::ShapeMismatch, "queries have inconsistent widths");
    }
    b.evidence_t.row(i) = as_row(q.evidence_t);
    b.evidence_y.row(i) = as_row(q.evidence_y);
    b.intervention_t.row(i) = as_row(q.intervention_t);
  }
  return b;
}

std::vector<CounterfactualQuery> to_queries(const QueryBatch& batch) {
  std::vector<CounterfactualQuery> out;
  out.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) out.push_back(batch.query(i));
  return out;
}

}  // namespace cfaudit
