#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace covevo {

struct Dataset {
  Eigen::MatrixXd X;  // n x d
  Eigen::VectorXd y;
  std::vector<std::string> columns;  // input column names, size d
  std::string target = "y";
  std::vector<int> train;  // row indices
  std::vector<int> test;
  std::string provenance;
  /// Generating kernel and its hyperparameters, for synthetic data.
  std::optional<std::string> generator;
  std::optional<Eigen::VectorXd> generator_theta;

  int dim() const { return static_cast<int>(X.cols()); }
  Eigen::Index size() const { return X.rows(); }
  Eigen::MatrixXd rows_X(const std::vector<int>& idx) const;
  Eigen::VectorXd rows_y(const std::vector<int>& idx) const;
  Eigen::MatrixXd train_X() const { return rows_X(train); }
  Eigen::VectorXd train_y() const { return rows_y(train); }
  Eigen::MatrixXd test_X() const { return rows_X(test); }
  Eigen::VectorXd test_y() const { return rows_y(test); }
};

/// Throws DataError when invariants (finite values, disjoint split, d >= 1) fail.
void check_dataset(const Dataset& data);

/// NOAA monthly-mean text: '#' comments, whitespace or comma separated columns
/// year, month, decimal_date, average, ...; average -99.99 marks a missing month.
/// train = date < train_end, test = train_end <= date < test_end.
Dataset load_co2(const std::string& path, double train_end = 2004.0, double test_end = 2012.0);
Dataset parse_co2(std::istream& in, const std::string& source, double train_end = 2004.0,
                  double test_end = 2012.0);

/// Comma-separated file with a header row. An optional "split" column holds
/// train/test; without it every row is training data. The target is the last
/// non-split column unless named.
Dataset load_csv(const std::string& path, const std::optional<std::string>& target = {});
Dataset parse_csv(std::istream& in, const std::string& source,
                  const std::optional<std::string>& target = {});

enum class DataFormat { Auto, Csv, Noaa };
std::optional<DataFormat> parse_data_format(std::string_view text);
/// Auto picks NOAA when the first data line starts with a number, CSV otherwise.
Dataset load_dataset(const std::string& path, DataFormat format = DataFormat::Auto,
                     const std::optional<std::string>& target = {});

enum class SyntheticKind { SeRq, SeMatern, SePeriodic };
inline constexpr SyntheticKind kAllSynthetic[] = {SyntheticKind::SeRq, SyntheticKind::SeMatern,
                                                  SyntheticKind::SePeriodic};

/// Accepts "SE+RQ", "se+rq", "SE+Matern", "SE+Periodic" (case-insensitive).
std::optional<SyntheticKind> parse_synthetic_name(std::string_view name);
std::string synthetic_name(SyntheticKind kind);
/// Generating kernel, e.g. "(Sum (Mask [1 0] SE) (Mask [0 1] RQ))".
std::string generator_text(SyntheticKind kind);

inline constexpr int kGridX0 = 42;
inline constexpr int kGridX1 = 21;
inline constexpr double kGridExtent = 10.0;
inline constexpr double kSyntheticNoise = 0.1;

/// 42 x 21 grid over [0, 10]^2 sampled from the generating GP prior with unit
/// hyperparameters plus N(0, 0.1^2) noise. Train = even x0 grid columns.
Dataset make_synthetic(SyntheticKind kind, std::uint64_t seed);

/// The 21 x 21 subgrid made of every other x0 column of a synthetic grid,
/// re-split by alternating its own x0 columns.
Dataset desk_subgrid(const Dataset& synthetic);

/// CSV with header "<columns>,<target>,split"; values printed round-trip exact.
void write_csv(const Dataset& data, std::ostream& out);

struct BaselineRow {
  std::string name;
  std::string kernel;
  double nll;  // +inf when every restart failed
  Eigen::VectorXd theta;
};

/// ML-II fits of SE, RQ, Periodic and Matern1 over all inputs, plus the
/// generating kernel ("Optimal") for synthetic data.
std::vector<BaselineRow> baseline_suite(const Dataset& data, std::uint64_t seed,
                                        int restarts = 10, int iterations = 50);

}  // namespace covevo
