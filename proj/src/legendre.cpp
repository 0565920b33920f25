#include <cmath>
#include <stdexcept>
#include <vector>

#include "polyscore/polybasis.hpp"

namespace polyscore {

LegendrePoly legendre_1d(int k) {
  if (k < 0) throw std::invalid_argument("legendre_1d: negative order");
  const MultiIndex x = MultiIndex::unit(1, 0);
  const PolyCoeffs xm1 = PolyCoeffs::monomial(x) - PolyCoeffs::constant(1, 1.0);
  const PolyCoeffs xp1 = PolyCoeffs::monomial(x) + PolyCoeffs::constant(1, 1.0);

  PolyCoeffs sum(1);
  for (int j = 0; j <= k; ++j) {
    PolyCoeffs term = PolyCoeffs::constant(1, binomial(k, j) * binomial(k, j));
    for (int a = 0; a < k - j; ++a) term = term * xm1;
    for (int b = 0; b < j; ++b) term = term * xp1;
    sum += term;
  }
  sum *= std::ldexp(1.0, -k);
  LegendrePoly out{sum, sum};
  out.normalized *= std::sqrt((2.0 * k + 1.0) / 2.0);
  return out;
}

namespace {

// Row k holds the power-basis coefficients of sqrt(2k+1) L_k.
std::vector<std::vector<double>> uniform_legendre_table(int d) {
  std::vector<std::vector<double>> a(d + 1, std::vector<double>(d + 1, 0.0));
  for (int k = 0; k <= d; ++k) {
    const PolyCoeffs lk = legendre_1d(k).raw;
    const double s = std::sqrt(2.0 * k + 1.0);
    for (const auto& [m, c] : lk.terms()) a[k][m[0]] = s * c;
  }
  return a;
}

// Row e holds coefficients c_k with x^e = sum_k c_k sqrt(2k+1) L_k(x).
std::vector<std::vector<double>> inverse_table(const std::vector<std::vector<double>>& a) {
  const int d = static_cast<int>(a.size()) - 1;
  std::vector<std::vector<double>> inv(d + 1, std::vector<double>(d + 1, 0.0));
  for (int e = 0; e <= d; ++e) {
    std::vector<double> rest(d + 1, 0.0);
    rest[e] = 1.0;
    for (int k = e; k >= 0; --k) {
      const double c = rest[k] / a[k][k];
      inv[e][k] = c;
      for (int p = 0; p <= k; ++p) rest[p] -= c * a[k][p];
    }
  }
  return inv;
}

// Expands prod_i (sum_j table[m_i][j] y_j) into emit(multi-index j, coeff).
template <typename Emit>
void tensor_expand(const std::vector<std::vector<double>>& table, const MultiIndex& m, double coeff,
                   Emit&& emit) {
  const std::size_t n = m.size();
  std::vector<int> cur(n, 0);
  auto rec = [&](auto&& self, std::size_t i, double acc) -> void {
    if (i == n) {
      emit(MultiIndex(cur), acc);
      return;
    }
    const auto& row = table[m[i]];
    for (int k = 0; k <= m[i]; ++k) {
      if (row[k] == 0.0) continue;
      cur[i] = k;
      self(self, i + 1, acc * row[k]);
    }
    cur[i] = 0;
  };
  rec(rec, 0, coeff);
}

}  // namespace

LegendreCoeffs to_legendre(const PolyCoeffs& f, int d) {
  if (f.degree() > d) {
    throw std::invalid_argument("to_legendre: degree " + std::to_string(f.degree()) + " exceeds d=" +
                                std::to_string(d));
  }
  const auto inv = inverse_table(uniform_legendre_table(d));
  LegendreCoeffs out;
  for (const auto& [m, c] : f.terms()) {
    tensor_expand(inv, m, c, [&](const MultiIndex& k, double v) { out[k] += v; });
  }
  std::erase_if(out, [](const auto& kv) { return kv.second == 0.0; });
  return out;
}

PolyCoeffs from_legendre(std::size_t n, const LegendreCoeffs& b, int d) {
  const auto a = uniform_legendre_table(d);
  PolyCoeffs f(n);
  for (const auto& [k, c] : b) {
    if (k.size() != n) throw std::invalid_argument("from_legendre: dimension mismatch");
    if (k.total() > d) throw std::invalid_argument("from_legendre: index exceeds degree d");
    tensor_expand(a, k, c, [&](const MultiIndex& p, double v) { f.add_term(p, v); });
  }
  return f;
}

}  // namespace polyscore
