#pragma once

#include <iosfwd>
#include <vector>

namespace tmaxbayes {

/// Posterior fit of a level series: point prediction and pointwise 95% band.
struct FittedSeries {
  std::vector<int> years;
  std::vector<double> observed;
  std::vector<double> mean;
  std::vector<double> lo95;
  std::vector<double> hi95;

  std::size_t size() const noexcept { return years.size(); }
};

/// year,observed,fit_mean,lo95,hi95
void write_fitted_csv(std::ostream& out, const FittedSeries& fitted);
FittedSeries read_fitted_csv(std::istream& in);

}  // namespace tmaxbayes
