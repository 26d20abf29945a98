#include "tmaxbayes/series.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "tmaxbayes/csv.hpp"
#include "tmaxbayes/errors.hpp"
#include "tmaxbayes/stats.hpp"

namespace tmaxbayes {
namespace {

constexpr std::array<std::string_view, 5> kKeys = {"annual", "winter", "pre_monsoon", "monsoon",
                                                   "post_monsoon"};

std::size_t season_slot(Column c) {
  switch (c) {
    case Column::Winter: return 0;
    case Column::PreMonsoon: return 1;
    case Column::Monsoon: return 2;
    case Column::PostMonsoon: return 3;
    case Column::Annual: break;
  }
  throw std::logic_error("annual is not a seasonal column");
}

bool is_missing_token(std::string_view s) {
  return s.empty() || s == "NA" || s == "na" || s == "N/A";
}

}  // namespace

std::string_view column_key(Column c) { return kKeys[static_cast<std::size_t>(c)]; }

std::optional<Column> column_from_key(std::string_view key) {
  for (std::size_t i = 0; i < kKeys.size(); ++i) {
    if (kKeys[i] == key) return static_cast<Column>(i);
  }
  return std::nullopt;
}

const std::string& ColumnMap::header_for(Column c) const {
  switch (c) {
    case Column::Annual: return annual;
    case Column::Winter: return winter;
    case Column::PreMonsoon: return pre_monsoon;
    case Column::Monsoon: return monsoon;
    case Column::PostMonsoon: return post_monsoon;
  }
  return annual;
}

ColumnMap ColumnMap::parse(std::string_view spec) {
  ColumnMap map;
  for (const auto& item : csv::split_record(spec)) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == item.size()) {
      throw ValidationError("column map entry '" + item + "' is not key=header");
    }
    const std::string key = item.substr(0, eq);
    std::string header = item.substr(eq + 1);
    if (key == "year") {
      map.year = std::move(header);
    } else if (auto c = column_from_key(key)) {
      switch (*c) {
        case Column::Annual: map.annual = std::move(header); break;
        case Column::Winter: map.winter = std::move(header); break;
        case Column::PreMonsoon: map.pre_monsoon = std::move(header); break;
        case Column::Monsoon: map.monsoon = std::move(header); break;
        case Column::PostMonsoon: map.post_monsoon = std::move(header); break;
      }
    } else {
      throw ValidationError("unknown column map key '" + key + "'");
    }
  }
  return map;
}

SeasonalTable::SeasonalTable(std::vector<int> years, std::vector<double> annual, Seasonal winter,
                             Seasonal pre_monsoon, Seasonal monsoon, Seasonal post_monsoon,
                             bool allow_seasonal_exceedance)
    : years_(std::move(years)),
      annual_(std::move(annual)),
      seasons_{std::move(winter), std::move(pre_monsoon), std::move(monsoon),
               std::move(post_monsoon)} {
  const std::size_t n = years_.size();
  if (annual_.size() != n) throw IngestError("annual column length differs from year column");
  for (auto& s : seasons_) {
    if (s.empty()) s.assign(n, std::nullopt);
    if (s.size() != n) throw IngestError("seasonal column length differs from year column");
  }

  for (std::size_t i = 1; i < n; ++i) {
    if (years_[i] == years_[i - 1]) {
      throw IngestError("duplicate year " + std::to_string(years_[i]));
    }
    if (years_[i] != years_[i - 1] + 1) {
      throw IngestError("years must be consecutive: " + std::to_string(years_[i - 1]) +
                        " is followed by " + std::to_string(years_[i]));
    }
  }
  if (n < 3) throw ValidationError("series needs at least 3 years, got " + std::to_string(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(annual_[i])) {
      throw IngestError("non-finite annual value in year " + std::to_string(years_[i]));
    }
    for (const auto& s : seasons_) {
      if (s[i] && !std::isfinite(*s[i])) {
        throw IngestError("non-finite seasonal value in year " + std::to_string(years_[i]));
      }
    }
  }
  if (!allow_seasonal_exceedance) {
    std::vector<int> offending;
    for (std::size_t i = 0; i < n; ++i) {
      for (const auto& s : seasons_) {
        if (s[i] && *s[i] > annual_[i]) {
          offending.push_back(years_[i]);
          break;
        }
      }
    }
    if (!offending.empty()) {
      std::ostringstream msg;
      msg << "seasonal maximum exceeds annual maximum in year(s)";
      for (int y : offending) msg << ' ' << y;
      throw ValidationError(msg.str(), std::move(offending));
    }
  }
}

const SeasonalTable::Seasonal& SeasonalTable::seasonal(Column c) const {
  return seasons_[season_slot(c)];
}

bool SeasonalTable::has_complete(Column c) const {
  if (c == Column::Annual) return true;
  const auto& s = seasonal(c);
  return std::all_of(s.begin(), s.end(), [](const auto& v) { return v.has_value(); });
}

std::vector<double> SeasonalTable::values(Column c) const {
  if (c == Column::Annual) return annual_;
  if (!has_complete(c)) {
    throw ValidationError("column '" + std::string(column_key(c)) + "' has missing values");
  }
  std::vector<double> out;
  out.reserve(size());
  for (const auto& v : seasonal(c)) out.push_back(*v);
  return out;
}

SeasonalTable read_table(std::istream& in, const LoadOptions& options) {
  const auto doc = csv::read(in);
  const auto& cols = options.columns;
  const auto year_idx = doc.column(cols.year);
  if (!year_idx) throw IngestError("missing year column '" + cols.year + "'");
  const auto annual_idx = doc.column(cols.annual);
  if (!annual_idx) throw IngestError("missing annual column '" + cols.annual + "'");

  std::array<std::optional<std::size_t>, 4> season_idx;
  for (std::size_t k = 0; k < 4; ++k) {
    season_idx[k] = doc.column(cols.header_for(static_cast<Column>(k + 1)));
  }

  struct Row {
    int year;
    double annual;
    std::array<std::optional<double>, 4> seasons;
  };
  std::vector<Row> rows;
  rows.reserve(doc.rows.size());

  auto cell = [&](std::size_t r, std::size_t c) -> std::string_view {
    const auto& fields = doc.rows[r];
    return c < fields.size() ? std::string_view(fields[c]) : std::string_view{};
  };

  for (std::size_t r = 0; r < doc.rows.size(); ++r) {
    const std::size_t line = doc.line_numbers[r];
    const auto year_text = cell(r, *year_idx);
    if (year_text.empty()) throw IngestError("missing year on line " + std::to_string(line));
    const auto year = csv::parse_integer(year_text);
    if (!year) throw ParseError(line, cols.year, "year '" + std::string(year_text) + "' is not an integer");

    Row row{static_cast<int>(*year), 0.0, {}};
    const auto annual_text = cell(r, *annual_idx);
    if (is_missing_token(annual_text)) {
      throw IngestError("missing annual value for year " + std::to_string(row.year));
    }
    const auto annual = csv::parse_double(annual_text);
    if (!annual || !std::isfinite(*annual)) {
      throw ParseError(line, cols.annual, "'" + std::string(annual_text) + "' is not a finite number");
    }
    row.annual = *annual;

    for (std::size_t k = 0; k < 4; ++k) {
      if (!season_idx[k]) continue;
      const auto text = cell(r, *season_idx[k]);
      if (is_missing_token(text)) continue;
      const auto v = csv::parse_double(text);
      if (!v || !std::isfinite(*v)) {
        throw ParseError(line, cols.header_for(static_cast<Column>(k + 1)),
                         "'" + std::string(text) + "' is not a finite number");
      }
      row.seasons[k] = *v;
    }
    rows.push_back(row);
  }

  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.year < b.year; });

  std::vector<int> years;
  std::vector<double> annual;
  std::array<SeasonalTable::Seasonal, 4> seasons;
  for (const auto& row : rows) {
    years.push_back(row.year);
    annual.push_back(row.annual);
    for (std::size_t k = 0; k < 4; ++k) seasons[k].push_back(row.seasons[k]);
  }
  return SeasonalTable(std::move(years), std::move(annual), std::move(seasons[0]),
                       std::move(seasons[1]), std::move(seasons[2]), std::move(seasons[3]),
                       options.allow_seasonal_exceedance);
}

SeasonalTable load_csv(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open '" + path.string() + "'");
  return read_table(in, options);
}

void write_table(std::ostream& out, const SeasonalTable& table, const ColumnMap& columns) {
  out << columns.year << ',' << columns.annual;
  for (std::size_t k = 1; k < kAllColumns.size(); ++k) out << ',' << columns.header_for(kAllColumns[k]);
  out << '\n';
  for (std::size_t i = 0; i < table.size(); ++i) {
    out << table.years()[i] << ',' << csv::format_double(table.annual()[i]);
    for (std::size_t k = 1; k < kAllColumns.size(); ++k) {
      out << ',';
      const auto& v = table.seasonal(kAllColumns[k])[i];
      if (v) out << csv::format_double(*v);
    }
    out << '\n';
  }
}

NormalizedSeries normalize(const SeasonalTable& table, Column column) {
  NormalizedSeries s;
  s.y = table.values(column);
  const std::size_t n = s.y.size();
  if (n < 3) throw ValidationError("normalize needs at least 3 observations");
  s.years = table.years();
  s.origin_year = s.years.front();

  s.t.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.t[i] = static_cast<double>(i) / static_cast<double>(n - 1);
  s.t.back() = 1.0;

  std::vector<double> yr(s.years.begin(), s.years.end());
  const double m = mean(yr);
  const double sd = std::sqrt(sample_variance(yr));
  s.x_std.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.x_std[i] = (yr[i] - m) / sd;
  return s;
}

void write_normalized_csv(std::ostream& out, const NormalizedSeries& s) {
  out << "year,t,x_std,y\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    out << s.years[i] << ',' << csv::format_double(s.t[i]) << ',' << csv::format_double(s.x_std[i])
        << ',' << csv::format_double(s.y[i]) << '\n';
  }
}

IncrementSeries increments(const NormalizedSeries& series) {
  if (series.size() < 2) throw ValidationError("increments need at least 2 observations");
  IncrementSeries inc;
  inc.deltas.reserve(series.size() - 1);
  for (std::size_t i = 1; i < series.size(); ++i) {
    inc.deltas.push_back(series.y[i] - series.y[i - 1]);
    inc.years.push_back(series.years.empty() ? static_cast<int>(i + 1) : series.years[i]);
  }
  return inc;
}

std::vector<double> accumulate_levels(double first, std::span<const double> deltas) {
  std::vector<double> levels;
  levels.reserve(deltas.size() + 1);
  levels.push_back(first);
  for (double d : deltas) levels.push_back(levels.back() + d);
  return levels;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("pearson: series lengths differ");
  if (a.size() < 3) throw ValidationError("pearson: need at least 3 paired values");
  const double ma = mean(a);
  const double mb = mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw DegenerateError("pearson: zero variance");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

CorrelationMatrix correlation_matrix(const SeasonalTable& table) {
  std::array<std::vector<double>, 5> cols;
  for (std::size_t k = 0; k < 5; ++k) cols[k] = table.values(kAllColumns[k]);
  CorrelationMatrix m;
  for (std::size_t i = 0; i < 5; ++i) {
    m(i, i) = 1.0;
    for (std::size_t j = 0; j < i; ++j) {
      const double r = pearson(cols[i], cols[j]);
      m(i, j) = r;
      m(j, i) = r;
    }
  }
  return m;
}

void write_correlation_csv(std::ostream& out, const CorrelationMatrix& m) {
  out << "column";
  for (auto c : kAllColumns) out << ',' << column_key(c);
  out << '\n';
  for (std::size_t i = 0; i < 5; ++i) {
    out << column_key(kAllColumns[i]);
    for (std::size_t j = 0; j < 5; ++j) out << ',' << csv::format_double(m(i, j));
    out << '\n';
  }
}

Eigen::MatrixXd read_correlation_csv(std::istream& in) {
  const auto doc = csv::read(in);
  const std::size_t k = doc.header.size() - 1;
  if (doc.header.size() < 2 || doc.rows.size() != k) {
    throw ShapeError("correlation CSV is not square");
  }
  Eigen::MatrixXd m(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    if (doc.rows[i].size() != k + 1 || doc.rows[i][0] != doc.header[i + 1]) {
      throw ShapeError("correlation CSV row " + std::to_string(i + 1) + " is malformed");
    }
    for (std::size_t j = 0; j < k; ++j) {
      const auto v = csv::parse_double(doc.rows[i][j + 1]);
      if (!v) throw ParseError(doc.line_numbers[i], doc.header[j + 1], "not a number");
      m(i, j) = *v;
    }
  }
  return m;
}

}  // namespace tmaxbayes
