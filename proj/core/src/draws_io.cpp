#include <istream>
#include <map>
#include <ostream>

#include "tmaxbayes/csv.hpp"
#include "tmaxbayes/errors.hpp"
#include "tmaxbayes/mcmc.hpp"

namespace tmaxbayes {

void write_draws_csv(std::ostream& out, const PosteriorDraws& draws) {
  out << "chain,iter";
  for (const auto& n : draws.names) out << ',' << n;
  out << '\n';
  for (std::size_t c = 0; c < draws.num_chains(); ++c) {
    const auto& m = draws.chains[c];
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      const std::size_t iter = static_cast<std::size_t>(r) < draws.iterations.size()
                                   ? draws.iterations[static_cast<std::size_t>(r)]
                                   : static_cast<std::size_t>(r + 1);
      out << (c + 1) << ',' << iter;
      for (Eigen::Index j = 0; j < m.cols(); ++j) out << ',' << csv::format_double(m(r, j));
      out << '\n';
    }
  }
}

PosteriorDraws read_draws_csv(std::istream& in) {
  const auto doc = csv::read(in);
  if (doc.header.size() < 3 || doc.header[0] != "chain" || doc.header[1] != "iter") {
    throw IngestError("draws CSV must start with chain,iter columns");
  }
  PosteriorDraws draws;
  draws.names.assign(doc.header.begin() + 2, doc.header.end());
  draws.transforms.assign(draws.names.size(), Transform::Identity);
  const std::size_t p = draws.names.size();

  std::map<long long, std::vector<std::vector<double>>> by_chain;
  std::map<long long, std::vector<std::size_t>> iters;
  for (std::size_t r = 0; r < doc.rows.size(); ++r) {
    const auto& row = doc.rows[r];
    if (row.size() != p + 2) throw ParseError(doc.line_numbers[r], "chain", "wrong field count");
    const auto chain = csv::parse_integer(row[0]);
    const auto iter = csv::parse_integer(row[1]);
    if (!chain) throw ParseError(doc.line_numbers[r], "chain", "not an integer");
    if (!iter) throw ParseError(doc.line_numbers[r], "iter", "not an integer");
    std::vector<double> values(p);
    for (std::size_t j = 0; j < p; ++j) {
      const auto v = csv::parse_double(row[j + 2]);
      if (!v) throw ParseError(doc.line_numbers[r], draws.names[j], "not a number");
      values[j] = *v;
    }
    by_chain[*chain].push_back(std::move(values));
    iters[*chain].push_back(static_cast<std::size_t>(*iter));
  }
  if (by_chain.empty()) throw IngestError("draws CSV has no rows");

  const std::size_t rows = by_chain.begin()->second.size();
  for (const auto& [chain, values] : by_chain) {
    if (values.size() != rows) throw ShapeError("chains in draws CSV have unequal lengths");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(p));
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < p; ++j) {
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = values[r][j];
      }
    }
    draws.chains.push_back(std::move(m));
  }
  draws.iterations = iters.begin()->second;
  draws.config.chains = draws.chains.size();
  return draws;
}

void write_summary_csv(std::ostream& out, const PosteriorDraws& draws) {
  const auto rhat = split_rhat(draws);
  const auto n_eff = ess(draws);
  const auto summary = summarize(draws);
  out << "param,rhat,ess,mean,sd,q2.5,q50,q97.5\n";
  for (std::size_t j = 0; j < summary.size(); ++j) {
    const auto& s = summary[j];
    out << s.name << ',' << csv::format_double(rhat[j].value) << ','
        << csv::format_double(n_eff[j].value) << ',' << csv::format_double(s.mean) << ','
        << csv::format_double(s.sd) << ',' << csv::format_double(s.q025) << ','
        << csv::format_double(s.q50) << ',' << csv::format_double(s.q975) << '\n';
  }
}

}  // namespace tmaxbayes
