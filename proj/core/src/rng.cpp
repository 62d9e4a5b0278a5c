#include "pamir/rng.hpp"

#include <algorithm>

namespace pamir {

IntVector multinomial_draw(std::mt19937_64& rng, std::int64_t m,
                           const Composition& z) {
  if (m < 0) throw Error("multinomial_draw: negative trial count");
  const Eigen::Index p = z.size();
  IntVector x = IntVector::Zero(p);
  std::int64_t remaining = m;
  double prob_left = 1.0;
  for (Eigen::Index j = 0; j + 1 < p && remaining > 0; ++j) {
    const double pj = std::clamp(z[j] / prob_left, 0.0, 1.0);
    std::binomial_distribution<std::int64_t> binom(remaining, pj);
    const std::int64_t draw = binom(rng);
    x[j] = draw;
    remaining -= draw;
    prob_left -= z[j];
    if (prob_left <= 0.0) break;
  }
  x[p - 1] += remaining;
  return x;
}

}  // namespace pamir
