#include "flowcheck/pit.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "flowcheck/errors.hpp"
#include "flowcheck/normal.hpp"
#include "flowcheck/parallel.hpp"

namespace flowcheck {

Vector compute_pit(const ConditionalFlow& flow, const Vector& theta, const Vector& x,
                   long* clip_count) {
  FlowInverse inv = flow.inverse(theta, x);
  Vector p(inv.z.size());
  for (std::size_t i = 0; i < inv.z.size(); ++i) {
    if (!std::isfinite(inv.z[i]))
      throw std::invalid_argument("compute_pit: non-finite inverse at coordinate " +
                                  std::to_string(i + 1));
    double u = normal_cdf(inv.z[i]);
    if (u < kPitClipEps) {
      u = kPitClipEps;
      if (clip_count) ++*clip_count;
    } else if (u > 1.0 - kPitClipEps) {
      u = 1.0 - kPitClipEps;
      if (clip_count) ++*clip_count;
    }
    p[i] = u;
  }
  return p;
}

PitMatrix pit_matrix(const ConditionalFlow& flow, const CalibrationDataset& data) {
  data.validate();
  if (!data.calibration_ok)
    throw ContractError(
        "pit_matrix: dataset is not marked as disjoint from the flow's training data; "
        "PIT diagnostics on training pairs are invalid (set calibration_ok after checking)");
  require_dim(data.m(), flow.m(), "pit_matrix theta dimension");
  require_dim(data.d(), flow.d(), "pit_matrix x dimension");

  PitMatrix out;
  out.values = Matrix(data.n(), flow.m());
  out.provenance = flow.tag() + " on " + data.tag();
  std::atomic<long> clips{0};
  parallel_for(data.n(), [&](std::size_t r) {
    long local = 0;
    Vector p = compute_pit(flow, data.theta.row_vector(static_cast<int>(r)),
                           data.x.row_vector(static_cast<int>(r)), &local);
    for (int c = 0; c < out.values.cols(); ++c) out.values(static_cast<int>(r), c) = p[c];
    if (local) clips += local;
  });
  out.clip_count = clips.load();
  return out;
}

Matrix normal_scores(const PitMatrix& pit, std::vector<std::pair<int, int>>* clipped) {
  Matrix z(pit.n(), pit.m());
  for (int r = 0; r < pit.n(); ++r)
    for (int c = 0; c < pit.m(); ++c) {
      const double u = pit.values(r, c);
      if (!(u > 0.0 && u < 1.0))
        throw ContractError("normal_scores: PIT entry outside (0,1)");
      if (clipped && (u <= kPitClipEps || u >= 1.0 - kPitClipEps)) clipped->emplace_back(r, c);
      z(r, c) = normal_quantile(u);
    }
  return z;
}

void save_pit_matrix(const PitMatrix& pit, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open PIT file for writing: " + path.string());
  out << "# provenance: " << pit.provenance << "\n";
  out << "# clip_count: " << pit.clip_count << "\n";
  for (int c = 0; c < pit.m(); ++c) out << "pit_" << (c + 1) << (c + 1 < pit.m() ? "," : "\n");
  char buf[40];
  for (int r = 0; r < pit.n(); ++r)
    for (int c = 0; c < pit.m(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", pit.values(r, c));
      out << buf << (c + 1 < pit.m() ? "," : "\n");
    }
}

}  // namespace flowcheck
