#include "covevo/datasets.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

#include "covevo/error.hpp"
#include "covevo/gp.hpp"
#include "covevo/hyperopt.hpp"
#include "covevo/kernel_expr.hpp"
#include "covevo/random.hpp"

namespace covevo {

Eigen::MatrixXd Dataset::rows_X(const std::vector<int>& idx) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), X.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(idx[i]);
  return out;
}

Eigen::VectorXd Dataset::rows_y(const std::vector<int>& idx) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Eigen::Index>(i)] = y[idx[i]];
  return out;
}

void check_dataset(const Dataset& data) {
  if (data.X.cols() < 1) throw DataError("dataset needs at least one input column");
  if (data.X.rows() != data.y.size()) throw DataError("X and y row counts differ");
  if (!data.X.allFinite() || !data.y.allFinite()) throw DataError("dataset has non-finite values");
  std::vector<char> seen(static_cast<std::size_t>(data.size()), 0);
  for (int i : data.train) {
    if (i < 0 || i >= data.size()) throw DataError("train index out of range");
    seen[i] = 1;
  }
  for (int i : data.test) {
    if (i < 0 || i >= data.size()) throw DataError("test index out of range");
    if (seen[i]) throw DataError("train and test partitions overlap");
  }
}

namespace {

std::vector<std::string> split_fields(const std::string& line, bool comma_only) {
  std::vector<std::string> out;
  std::string cur;
  bool in_field = false;
  for (char c : line) {
    bool sep = c == ',' || (!comma_only && std::isspace(static_cast<unsigned char>(c)));
    if (sep) {
      if (comma_only || in_field) out.push_back(cur);
      cur.clear();
      in_field = false;
    } else if (comma_only || !std::isspace(static_cast<unsigned char>(c))) {
      cur.push_back(c);
      in_field = true;
    }
  }
  if (comma_only || in_field) out.push_back(cur);
  if (comma_only) {
    for (auto& f : out) {
      auto b = f.find_first_not_of(" \t\r");
      auto e = f.find_last_not_of(" \t\r");
      f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
    }
  }
  return out;
}

bool parse_number(const std::string& s, double& value) {
  if (s.empty()) return false;
  const char* begin = s.data();
  const char* end = begin + s.size();
  if (*begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  return ec == std::errc() && ptr == end;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return in;
}

}  // namespace

Dataset parse_co2(std::istream& in, const std::string& source, double train_end,
                  double test_end) {
  std::vector<double> dates, values;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    auto fields = split_fields(line, false);
    double year = 0, month = 0, date = 0, average = 0;
    if (fields.size() < 4 || !parse_number(fields[0], year) || !parse_number(fields[1], month) ||
        !parse_number(fields[2], date) || !parse_number(fields[3], average)) {
      throw DataError(source + ":" + std::to_string(line_no) + ": malformed CO2 row");
    }
    if (std::abs(average + 99.99) < 1e-9) continue;
    if (date >= test_end) continue;
    if (!dates.empty() && date <= dates.back())
      throw DataError(source + ":" + std::to_string(line_no) + ": dates are not increasing");
    dates.push_back(date);
    values.push_back(average);
  }

  Dataset data;
  const auto n = static_cast<Eigen::Index>(dates.size());
  data.X = Eigen::Map<Eigen::VectorXd>(dates.data(), n);
  data.y = Eigen::Map<Eigen::VectorXd>(values.data(), n);
  data.columns = {"decimal_date"};
  data.target = "co2_ppm";
  for (Eigen::Index i = 0; i < n; ++i) {
    (dates[i] < train_end ? data.train : data.test).push_back(static_cast<int>(i));
  }
  if (data.train.empty()) throw DataError(source + ": empty training partition");
  if (data.test.empty()) throw DataError(source + ": empty test partition");
  std::ostringstream prov;
  prov << "noaa:" << source << " train<" << train_end << " test<" << test_end;
  data.provenance = prov.str();
  check_dataset(data);
  return data;
}

Dataset load_co2(const std::string& path, double train_end, double test_end) {
  auto in = open_input(path);
  return parse_co2(in, path, train_end, test_end);
}

Dataset parse_csv(std::istream& in, const std::string& source,
                  const std::optional<std::string>& target) {
  std::string line;
  int line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    header = split_fields(line, true);
    break;
  }
  if (header.empty()) throw DataError(source + ": missing header row");

  int split_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (lower(header[c]) == "split") split_col = static_cast<int>(c);
  }
  int target_col = -1;
  if (target) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == *target) target_col = static_cast<int>(c);
    }
    if (target_col < 0 || target_col == split_col)
      throw DataError(source + ": no target column named '" + *target + "'");
  } else {
    for (int c = static_cast<int>(header.size()) - 1; c >= 0; --c) {
      if (c != split_col) {
        target_col = c;
        break;
      }
    }
  }
  std::vector<int> input_cols;
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    if (c != split_col && c != target_col) input_cols.push_back(c);
  }
  if (target_col < 0 || input_cols.empty())
    throw DataError(source + ": need at least one input column and a target column");

  std::vector<std::vector<double>> rows;
  std::vector<double> ys;
  Dataset data;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = split_fields(line, true);
    if (fields.size() != header.size())
      throw DataError(source + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields");
    std::vector<double> row;
    for (int c : input_cols) {
      double v = 0;
      if (!parse_number(fields[c], v))
        throw DataError(source + ":" + std::to_string(line_no) + ": bad number '" + fields[c] + "'");
      row.push_back(v);
    }
    double v = 0;
    if (!parse_number(fields[target_col], v))
      throw DataError(source + ":" + std::to_string(line_no) + ": bad target '" +
                      fields[target_col] + "'");
    const int index = static_cast<int>(rows.size());
    if (split_col < 0) {
      data.train.push_back(index);
    } else {
      auto s = lower(fields[split_col]);
      if (s == "train") {
        data.train.push_back(index);
      } else if (s == "test") {
        data.test.push_back(index);
      } else {
        throw DataError(source + ":" + std::to_string(line_no) + ": split must be train or test");
      }
    }
    rows.push_back(std::move(row));
    ys.push_back(v);
  }
  if (rows.empty()) throw DataError(source + ": no data rows");

  data.X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(input_cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < input_cols.size(); ++c) data.X(i, c) = rows[i][c];
  }
  data.y = Eigen::Map<Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  for (int c : input_cols) data.columns.push_back(header[c]);
  data.target = header[target_col];
  data.provenance = "csv:" + source;
  if (data.train.empty()) throw DataError(source + ": empty training partition");
  check_dataset(data);
  return data;
}

Dataset load_csv(const std::string& path, const std::optional<std::string>& target) {
  auto in = open_input(path);
  return parse_csv(in, path, target);
}

std::optional<DataFormat> parse_data_format(std::string_view text) {
  auto t = lower(text);
  if (t == "auto") return DataFormat::Auto;
  if (t == "csv") return DataFormat::Csv;
  if (t == "noaa" || t == "co2") return DataFormat::Noaa;
  return std::nullopt;
}

Dataset load_dataset(const std::string& path, DataFormat format,
                     const std::optional<std::string>& target) {
  if (format == DataFormat::Auto) {
    auto in = open_input(path);
    std::string line;
    format = DataFormat::Csv;
    while (std::getline(in, line)) {
      auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      char c = line[first];
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.')
        format = DataFormat::Noaa;
      break;
    }
  }
  return format == DataFormat::Noaa ? load_co2(path) : load_csv(path, target);
}

// --- synthetic -------------------------------------------------------------

std::optional<SyntheticKind> parse_synthetic_name(std::string_view name) {
  auto n = lower(name);
  if (n == "se+rq") return SyntheticKind::SeRq;
  if (n == "se+matern" || n == "se+matern1") return SyntheticKind::SeMatern;
  if (n == "se+periodic") return SyntheticKind::SePeriodic;
  return std::nullopt;
}

std::string synthetic_name(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::SeRq:
      return "SE+RQ";
    case SyntheticKind::SeMatern:
      return "SE+Matern";
    case SyntheticKind::SePeriodic:
      return "SE+Periodic";
  }
  return {};
}

std::string generator_text(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::SeRq:
      return "(Sum (Mask [1 0] SE) (Mask [0 1] RQ))";
    case SyntheticKind::SeMatern:
      return "(Sum (Mask [1 0] SE) (Mask [0 1] Matern1))";
    case SyntheticKind::SePeriodic:
      return "(Sum (Mask [1 0] SE) (Mask [0 1] Periodic))";
  }
  return {};
}

Dataset make_synthetic(SyntheticKind kind, std::uint64_t seed) {
  Dataset data;
  const int n = kGridX0 * kGridX1;
  data.X.resize(n, 2);
  int row = 0;
  for (int i = 0; i < kGridX0; ++i) {
    for (int j = 0; j < kGridX1; ++j, ++row) {
      data.X(row, 0) = kGridExtent * i / (kGridX0 - 1);
      data.X(row, 1) = kGridExtent * j / (kGridX1 - 1);
      (i % 2 == 0 ? data.train : data.test).push_back(row);
    }
  }
  const auto text = generator_text(kind);
  const auto expr = parse_expr(text, 2);
  // Unit ell, sf, alpha and period; log values are all zero.
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(expr_metrics(expr).param_count + 1);
  theta[theta.size() - 1] = std::log(kSyntheticNoise);

  data.y = sample_prior(expr, theta, data.X, derive_seed(seed, 1));
  Rng rng(derive_seed(seed, 2));
  std::normal_distribution<double> normal(0.0, kSyntheticNoise);
  for (Eigen::Index i = 0; i < data.y.size(); ++i) data.y[i] += normal(rng);

  data.columns = {"x0", "x1"};
  data.target = "y";
  data.generator = text;
  data.generator_theta = theta;
  data.provenance = "synthetic:" + synthetic_name(kind) + " seed=" + std::to_string(seed);
  check_dataset(data);
  return data;
}

Dataset desk_subgrid(const Dataset& synthetic) {
  if (!synthetic.generator || synthetic.dim() != 2 || synthetic.size() != kGridX0 * kGridX1)
    throw DataError("desk_subgrid needs a full synthetic grid");
  Dataset out;
  std::vector<int> keep;
  std::vector<int> column;
  for (Eigen::Index r = 0; r < synthetic.size(); ++r) {
    int i = static_cast<int>(std::lround(synthetic.X(r, 0) * (kGridX0 - 1) / kGridExtent));
    if (i % 2 == 0) {
      keep.push_back(static_cast<int>(r));
      column.push_back(i / 2);
    }
  }
  out.X = synthetic.rows_X(keep);
  out.y = synthetic.rows_y(keep);
  for (std::size_t k = 0; k < keep.size(); ++k) {
    (column[k] % 2 == 0 ? out.train : out.test).push_back(static_cast<int>(k));
  }
  out.columns = synthetic.columns;
  out.target = synthetic.target;
  out.generator = synthetic.generator;
  out.generator_theta = synthetic.generator_theta;
  out.provenance = synthetic.provenance + " subgrid=21x21";
  check_dataset(out);
  return out;
}

void write_csv(const Dataset& data, std::ostream& out) {
  for (const auto& c : data.columns) out << c << ',';
  out << data.target << ",split\n";
  std::vector<const char*> split(static_cast<std::size_t>(data.size()), "none");
  for (int i : data.train) split[i] = "train";
  for (int i : data.test) split[i] = "test";
  std::ostringstream line;
  line << std::setprecision(17);
  for (Eigen::Index r = 0; r < data.size(); ++r) {
    line.str("");
    for (Eigen::Index c = 0; c < data.X.cols(); ++c) line << data.X(r, c) << ',';
    line << data.y[r] << ',' << split[r] << '\n';
    out << line.str();
  }
}

std::vector<BaselineRow> baseline_suite(const Dataset& data, std::uint64_t seed, int restarts,
                                        int iterations) {
  std::vector<std::pair<std::string, std::string>> kernels = {
      {"SE", "SE"}, {"RQ", "RQ"}, {"Periodic", "Periodic"}, {"Matern1", "Matern1"}};
  if (data.generator) kernels.emplace_back("Optimal", *data.generator);

  const Eigen::MatrixXd X = data.train_X();
  const Eigen::VectorXd y = data.train_y();
  Ml2Options opt;
  opt.restarts = restarts;
  opt.iterations = iterations;
  opt.scales = InitScales::from_data(X, y);

  std::vector<BaselineRow> rows;
  for (std::size_t k = 0; k < kernels.size(); ++k) {
    BaselineRow row{kernels[k].first, kernels[k].second, std::numeric_limits<double>::infinity(), {}};
    opt.seed = derive_seed(seed, 0xba5e, k);
    try {
      auto res = ml2_fit(parse_expr(row.kernel, data.dim()), X, y, opt);
      row.nll = res.nll;
      row.theta = res.theta;
    } catch (const NumericalError&) {
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace covevo
