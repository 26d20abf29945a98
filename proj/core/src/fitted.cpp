#include "tmaxbayes/fitted.hpp"

#include <istream>
#include <ostream>

#include "tmaxbayes/csv.hpp"
#include "tmaxbayes/errors.hpp"

namespace tmaxbayes {

void write_fitted_csv(std::ostream& out, const FittedSeries& f) {
  out << "year,observed,fit_mean,lo95,hi95\n";
  for (std::size_t i = 0; i < f.size(); ++i) {
    out << f.years[i] << ',' << csv::format_double(f.observed[i]) << ','
        << csv::format_double(f.mean[i]) << ',' << csv::format_double(f.lo95[i]) << ','
        << csv::format_double(f.hi95[i]) << '\n';
  }
}

FittedSeries read_fitted_csv(std::istream& in) {
  const auto doc = csv::read(in);
  const std::vector<std::string> expected = {"year", "observed", "fit_mean", "lo95", "hi95"};
  if (doc.header != expected) throw IngestError("fitted CSV must have columns year,observed,fit_mean,lo95,hi95");
  FittedSeries f;
  for (std::size_t r = 0; r < doc.rows.size(); ++r) {
    const auto& row = doc.rows[r];
    if (row.size() != expected.size()) throw ParseError(doc.line_numbers[r], "year", "wrong field count");
    const auto year = csv::parse_integer(row[0]);
    if (!year) throw ParseError(doc.line_numbers[r], "year", "not an integer");
    f.years.push_back(static_cast<int>(*year));
    std::vector<double>* targets[] = {&f.observed, &f.mean, &f.lo95, &f.hi95};
    for (std::size_t k = 0; k < 4; ++k) {
      const auto v = csv::parse_double(row[k + 1]);
      if (!v) throw ParseError(doc.line_numbers[r], expected[k + 1], "not a number");
      targets[k]->push_back(*v);
    }
  }
  return f;
}

}  // namespace tmaxbayes
