#include "flowcheck/rng.hpp"

#include "flowcheck/normal.hpp"

namespace flowcheck {

std::uint64_t RngStream::mix(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over both words
  auto fin = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return fin(seed ^ fin(stream + 0x632be59bd9b4e019ULL));
}

double RngStream::normal() { return normal_quantile(u01()); }

std::uint64_t RngStream::below(std::uint64_t n) {
  if (n == 0) throw ContractError("RngStream::below: n must be positive");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = gen_();
  } while (x >= limit);
  return x % n;
}

Vector RngStream::normal_vector(int n) {
  Vector v(n);
  for (double& x : v) x = normal();
  return v;
}

Vector RngStream::u01_vector(int n) {
  Vector v(n);
  for (double& x : v) x = u01();
  return v;
}

void RngStream::shuffle(std::vector<int>& idx) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    std::size_t j = below(i);
    std::swap(idx[i - 1], idx[j]);
  }
}

}  // namespace flowcheck
