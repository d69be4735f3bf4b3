#include "flowcheck/sbc.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include "flowcheck/errors.hpp"
#include "flowcheck/parallel.hpp"
#include "flowcheck/rng.hpp"

namespace flowcheck {

SbcRanks sbc_ranks(const ConditionalFlow& flow, const CalibrationDataset& data, int L,
                   std::uint64_t seed) {
  if (L < 20) throw ContractError("sbc_ranks: need at least 20 posterior draws per pair");
  data.validate();
  require_dim(data.m(), flow.m(), "sbc_ranks theta dimension");
  require_dim(data.d(), flow.d(), "sbc_ranks x dimension");

  SbcRanks out;
  out.n = data.n();
  out.m = data.m();
  out.L = L;
  out.ranks.assign(static_cast<std::size_t>(out.n) * out.m, 0);
  parallel_for(out.n, [&](std::size_t row) {
    RngStream rng(seed, 3000 + row);
    const Vector x = data.x.row_vector(static_cast<int>(row));
    std::vector<int> rank(out.m, 0);
    for (int l = 0; l < L; ++l) {
      Vector draw = flow.sample(rng, x);
      for (int c = 0; c < out.m; ++c)
        if (draw[c] < data.theta(static_cast<int>(row), c)) ++rank[c];
    }
    for (int c = 0; c < out.m; ++c) out.ranks[row * out.m + c] = rank[c];
  });
  return out;
}

double sbc_chi2_pvalue(const SbcRanks& ranks, int coord, int n_bins) {
  if (coord < 0 || coord >= ranks.m) throw ContractError("sbc_chi2_pvalue: coordinate out of range");
  if (n_bins < 2 || n_bins > ranks.L + 1) throw ContractError("sbc_chi2_pvalue: bad bin count");
  std::vector<long> hist(n_bins, 0);
  std::vector<long> values_per_bin(n_bins, 0);  // L+1 rank values rarely split evenly
  for (int v = 0; v <= ranks.L; ++v)
    ++values_per_bin[static_cast<int>(static_cast<long>(v) * n_bins / (ranks.L + 1))];
  for (int row = 0; row < ranks.n; ++row) {
    int bin = static_cast<int>(static_cast<long>(ranks(row, coord)) * n_bins / (ranks.L + 1));
    ++hist[bin];
  }
  double stat = 0.0;
  for (int b = 0; b < n_bins; ++b) {
    const double expected = static_cast<double>(ranks.n) * values_per_bin[b] / (ranks.L + 1);
    const double dev = hist[b] - expected;
    stat += dev * dev / expected;
  }
  boost::math::chi_squared chi(n_bins - 1);
  return boost::math::cdf(boost::math::complement(chi, stat));
}

}  // namespace flowcheck
