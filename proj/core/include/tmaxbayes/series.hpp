#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace tmaxbayes {

enum class Column { Annual, Winter, PreMonsoon, Monsoon, PostMonsoon };

inline constexpr std::array<Column, 5> kAllColumns = {
    Column::Annual, Column::Winter, Column::PreMonsoon, Column::Monsoon, Column::PostMonsoon};

/// Canonical key: annual, winter, pre_monsoon, monsoon, post_monsoon.
std::string_view column_key(Column c);
std::optional<Column> column_from_key(std::string_view key);

/// CSV header names for each logical column.
struct ColumnMap {
  std::string year = "YEAR";
  std::string annual = "ANNUAL";
  std::string winter = "JAN-FEB";
  std::string pre_monsoon = "MAR-MAY";
  std::string monsoon = "JUN-SEP";
  std::string post_monsoon = "OCT-DEC";

  const std::string& header_for(Column c) const;

  /// Applies overrides of the form "annual=Tmax,year=Yr" on top of the defaults.
  static ColumnMap parse(std::string_view spec);
};

struct LoadOptions {
  ColumnMap columns;
  /// Accept rows where a seasonal maximum exceeds the annual maximum.
  bool allow_seasonal_exceedance = false;
};

/// Annual and seasonal maxima (degrees C) for consecutive years.
class SeasonalTable {
 public:
  using Seasonal = std::vector<std::optional<double>>;

  /// Validates invariants; throws IngestError / ValidationError.
  SeasonalTable(std::vector<int> years, std::vector<double> annual, Seasonal winter = {},
                Seasonal pre_monsoon = {}, Seasonal monsoon = {}, Seasonal post_monsoon = {},
                bool allow_seasonal_exceedance = false);

  std::size_t size() const noexcept { return years_.size(); }
  const std::vector<int>& years() const noexcept { return years_; }
  const std::vector<double>& annual() const noexcept { return annual_; }
  const Seasonal& seasonal(Column c) const;

  bool has_complete(Column c) const;
  /// Values of a fully populated column; throws ValidationError otherwise.
  std::vector<double> values(Column c) const;

  bool operator==(const SeasonalTable&) const = default;

 private:
  std::vector<int> years_;
  std::vector<double> annual_;
  std::array<Seasonal, 4> seasons_;
};

SeasonalTable load_csv(const std::filesystem::path& path, const LoadOptions& options = {});
SeasonalTable read_table(std::istream& in, const LoadOptions& options = {});
void write_table(std::ostream& out, const SeasonalTable& table, const ColumnMap& columns = {});

struct NormalizedSeries {
  std::vector<int> years;
  std::vector<double> t;      // (i - 1) / (N - 1)
  std::vector<double> x_std;  // centered year over its sample sd
  std::vector<double> y;
  int origin_year = 0;

  std::size_t size() const noexcept { return y.size(); }
};

NormalizedSeries normalize(const SeasonalTable& table, Column column = Column::Annual);
void write_normalized_csv(std::ostream& out, const NormalizedSeries& series);

/// Year-on-year differences y_i - y_{i-1}.
struct IncrementSeries {
  std::vector<double> deltas;
  std::vector<int> years;  // year of the later observation in each pair

  std::size_t size() const noexcept { return deltas.size(); }
};

IncrementSeries increments(const NormalizedSeries& series);
/// Inverse of increments given the first level.
std::vector<double> accumulate_levels(double first, std::span<const double> deltas);

/// Pearson product-moment correlation; throws DegenerateError on zero variance.
double pearson(std::span<const double> a, std::span<const double> b);

using CorrelationMatrix = Eigen::Matrix<double, 5, 5>;

/// Correlations among annual, winter, pre-monsoon, monsoon, post-monsoon.
CorrelationMatrix correlation_matrix(const SeasonalTable& table);

void write_correlation_csv(std::ostream& out, const CorrelationMatrix& m);
/// Reads a labelled square matrix written by write_correlation_csv.
Eigen::MatrixXd read_correlation_csv(std::istream& in);

}  // namespace tmaxbayes
