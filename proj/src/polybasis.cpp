#include "polyscore/polybasis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>

namespace polyscore {

MultiIndex::MultiIndex(std::vector<int> degrees) : degrees_(std::move(degrees)) {
  for (int v : degrees_) {
    if (v < 0) throw std::invalid_argument("MultiIndex: negative degree");
    total_ += v;
  }
}

MultiIndex MultiIndex::zero(std::size_t n) { return MultiIndex(std::vector<int>(n, 0)); }

MultiIndex MultiIndex::unit(std::size_t n, std::size_t i, int power) {
  std::vector<int> d(n, 0);
  d.at(i) = power;
  return MultiIndex(std::move(d));
}

MultiIndex MultiIndex::operator+(const MultiIndex& other) const {
  if (other.size() != size()) throw std::invalid_argument("MultiIndex: dimension mismatch");
  std::vector<int> d(degrees_);
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += other.degrees_[i];
  return MultiIndex(std::move(d));
}

std::string MultiIndex::key() const {
  std::string out;
  for (std::size_t i = 0; i < degrees_.size(); ++i) {
    if (i) out.push_back(',');
    out += std::to_string(degrees_[i]);
  }
  return out;
}

MultiIndex MultiIndex::from_key(std::string_view key) {
  std::vector<int> d;
  std::size_t pos = 0;
  while (pos <= key.size()) {
    std::size_t comma = key.find(',', pos);
    if (comma == std::string_view::npos) comma = key.size();
    std::string_view tok = key.substr(pos, comma - pos);
    int v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || tok.empty() || v < 0) {
      throw std::invalid_argument("bad multi-index key '" + std::string(key) + "'");
    }
    d.push_back(v);
    pos = comma + 1;
  }
  return MultiIndex(std::move(d));
}

double MultiIndex::monomial(std::span<const double> x) const {
  double v = 1.0;
  for (std::size_t i = 0; i < degrees_.size(); ++i) {
    for (int k = 0; k < degrees_[i]; ++k) v *= x[i];
  }
  return v;
}

bool graded_less(const MultiIndex& a, const MultiIndex& b) {
  if (a.total() != b.total()) return a.total() < b.total();
  const auto& da = a.degrees();
  const auto& db = b.degrees();
  return std::lexicographical_compare(db.begin(), db.end(), da.begin(), da.end());
}

std::size_t MultiIndexHash::operator()(const MultiIndex& m) const noexcept {
  std::size_t h = 0x9e3779b97f4a7c15ULL;
  for (int v : m.degrees()) h = (h ^ static_cast<std::size_t>(v)) * 0x100000001b3ULL + (h >> 7);
  return h;
}

std::vector<MultiIndex> indices_of_degree(std::size_t n, int t) {
  std::vector<MultiIndex> out;
  std::vector<int> cur(n, 0);
  // First coordinate descends from t, which yields lex-descending order.
  std::function<void(std::size_t, int)> rec = [&](std::size_t i, int remaining) {
    if (i + 1 == n) {
      cur[i] = remaining;
      out.emplace_back(cur);
      return;
    }
    for (int v = remaining; v >= 0; --v) {
      cur[i] = v;
      rec(i + 1, remaining - v);
    }
  };
  if (n > 0) rec(0, t);
  return out;
}

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return std::round(r);
}

MonomialBasis::MonomialBasis(std::size_t n, int d, std::vector<MultiIndex> indices)
    : n_(n), d_(d), indices_(std::move(indices)) {
  exps_.reserve(indices_.size() * n_);
  for (std::size_t j = 0; j < indices_.size(); ++j) {
    if (indices_[j].size() != n_) throw std::invalid_argument("MonomialBasis: index dimension mismatch");
    for (int v : indices_[j].degrees()) exps_.push_back(v);
    if (!lookup_.emplace(indices_[j], j).second) {
      throw std::invalid_argument("MonomialBasis: duplicate index " + indices_[j].key());
    }
  }
}

std::optional<std::size_t> MonomialBasis::index_of(const MultiIndex& m) const {
  auto it = lookup_.find(m);
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

MonomialBasis enumerate_basis(std::size_t n, int d) {
  if (n == 0) throw std::invalid_argument("enumerate_basis: n must be positive");
  if (d < 1 || d % 2 == 0) {
    throw std::invalid_argument("enumerate_basis: d must be an odd positive integer (got " +
                                std::to_string(d) + ")");
  }
  std::vector<MultiIndex> all;
  for (int t = 1; t <= d; ++t) {
    auto layer = indices_of_degree(n, t);
    all.insert(all.end(), std::make_move_iterator(layer.begin()), std::make_move_iterator(layer.end()));
  }
  return MonomialBasis(n, d, std::move(all));
}

BasisPtr make_basis(std::size_t n, int d) {
  return std::make_shared<const MonomialBasis>(enumerate_basis(n, d));
}

// --- PolyCoeffs -------------------------------------------------------------

PolyCoeffs PolyCoeffs::constant(std::size_t n, double c) {
  PolyCoeffs p(n);
  p.add_term(MultiIndex::zero(n), c);
  return p;
}

PolyCoeffs PolyCoeffs::monomial(const MultiIndex& m, double c) {
  PolyCoeffs p(m.size());
  p.add_term(m, c);
  return p;
}

int PolyCoeffs::degree() const {
  int deg = 0;
  for (const auto& [m, c] : terms_) deg = std::max(deg, m.total());
  return deg;
}

double PolyCoeffs::coeff(const MultiIndex& m) const {
  auto it = terms_.find(m);
  return it == terms_.end() ? 0.0 : it->second;
}

void PolyCoeffs::add_term(const MultiIndex& m, double c) {
  if (m.size() != n_) throw std::invalid_argument("PolyCoeffs: term dimension mismatch");
  if (c == 0.0) return;
  auto [it, inserted] = terms_.emplace(m, c);
  if (!inserted) {
    it->second += c;
    if (it->second == 0.0) terms_.erase(it);
  }
}

void PolyCoeffs::set_term(const MultiIndex& m, double c) {
  if (m.size() != n_) throw std::invalid_argument("PolyCoeffs: term dimension mismatch");
  if (c == 0.0) {
    terms_.erase(m);
  } else {
    terms_[m] = c;
  }
}

double PolyCoeffs::evaluate(std::span<const double> x) const {
  if (x.size() != n_) throw std::invalid_argument("PolyCoeffs::evaluate: dimension mismatch");
  double s = 0.0;
  for (const auto& [m, c] : terms_) s += c * m.monomial(x);
  return s;
}

PolyCoeffs& PolyCoeffs::operator+=(const PolyCoeffs& other) {
  if (other.n_ != n_) throw std::invalid_argument("PolyCoeffs: dimension mismatch");
  for (const auto& [m, c] : other.terms_) add_term(m, c);
  return *this;
}

PolyCoeffs& PolyCoeffs::operator*=(double s) {
  if (s == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto& [m, c] : terms_) c *= s;
  return *this;
}

PolyCoeffs operator-(PolyCoeffs a, const PolyCoeffs& b) {
  if (a.n_ != b.n_) throw std::invalid_argument("PolyCoeffs: dimension mismatch");
  for (const auto& [m, c] : b.terms_) a.add_term(m, -c);
  return a;
}

PolyCoeffs operator*(const PolyCoeffs& a, const PolyCoeffs& b) {
  if (a.n_ != b.n_) throw std::invalid_argument("PolyCoeffs: dimension mismatch");
  PolyCoeffs out(a.n_);
  for (const auto& [ma, ca] : a.terms_) {
    for (const auto& [mb, cb] : b.terms_) out.add_term(ma + mb, ca * cb);
  }
  return out;
}

// --- statistics ---------------------------------------------------------------

namespace {

void check_dim(const MonomialBasis& basis, std::span<const double> x) {
  if (x.size() != basis.n()) {
    throw std::invalid_argument("dimension mismatch: basis has n=" + std::to_string(basis.n()) +
                                " but x has " + std::to_string(x.size()) + " entries");
  }
}

// powers[i * (dmax + 1) + k] = x_i^k
std::vector<double> power_table(std::span<const double> x, int dmax) {
  const std::size_t stride = static_cast<std::size_t>(dmax) + 1;
  std::vector<double> pw(x.size() * stride);
  for (std::size_t i = 0; i < x.size(); ++i) {
    double v = 1.0;
    for (int k = 0; k <= dmax; ++k) {
      pw[i * stride + k] = v;
      v *= x[i];
    }
  }
  return pw;
}

}  // namespace

Eigen::VectorXd eval_suffstats(const MonomialBasis& basis, std::span<const double> x) {
  check_dim(basis, x);
  const std::size_t n = basis.n();
  const std::size_t stride = static_cast<std::size_t>(basis.d()) + 1;
  auto pw = power_table(x, basis.d());
  Eigen::VectorXd t(basis.size());
  for (std::size_t j = 0; j < basis.size(); ++j) {
    double v = 1.0;
    for (std::size_t i = 0; i < n; ++i) v *= pw[i * stride + basis.exponent(j, i)];
    t[j] = v;
  }
  return t;
}

Eigen::MatrixXd eval_jacobian(const MonomialBasis& basis, std::span<const double> x) {
  check_dim(basis, x);
  const std::size_t n = basis.n();
  const std::size_t stride = static_cast<std::size_t>(basis.d()) + 1;
  auto pw = power_table(x, basis.d());
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(basis.size(), n);
  for (std::size_t j = 0; j < basis.size(); ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      const int di = basis.exponent(j, i);
      if (di == 0) continue;
      double v = di;
      for (std::size_t k = 0; k < n; ++k) {
        const int e = basis.exponent(j, k) - (k == i ? 1 : 0);
        v *= pw[k * stride + e];
      }
      jac(j, i) = v;
    }
  }
  return jac;
}

Eigen::VectorXd eval_laplacian(const MonomialBasis& basis, std::span<const double> x) {
  check_dim(basis, x);
  const std::size_t n = basis.n();
  const std::size_t stride = static_cast<std::size_t>(basis.d()) + 1;
  auto pw = power_table(x, basis.d());
  Eigen::VectorXd lap = Eigen::VectorXd::Zero(basis.size());
  for (std::size_t j = 0; j < basis.size(); ++j) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const int dk = basis.exponent(j, k);
      if (dk < 2) continue;
      double v = static_cast<double>(dk) * (dk - 1);
      for (std::size_t i = 0; i < n; ++i) {
        const int e = basis.exponent(j, i) - (i == k ? 2 : 0);
        v *= pw[i * stride + e];
      }
      s += v;
    }
    lap[j] = s;
  }
  return lap;
}

PolyCoeffs theta_to_poly(const MonomialBasis& basis, const Eigen::VectorXd& theta) {
  if (static_cast<std::size_t>(theta.size()) != basis.size()) {
    throw std::invalid_argument("theta_to_poly: theta length mismatch");
  }
  PolyCoeffs f(basis.n());
  for (std::size_t j = 0; j < basis.size(); ++j) f.add_term(basis[j], theta[j]);
  return f;
}

Eigen::VectorXd poly_to_theta(const MonomialBasis& basis, const PolyCoeffs& f) {
  if (f.n() != basis.n()) throw std::invalid_argument("poly_to_theta: dimension mismatch");
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(basis.size());
  for (const auto& [m, c] : f.terms()) {
    if (m.total() == 0) continue;
    auto j = basis.index_of(m);
    if (!j) {
      throw std::invalid_argument("poly_to_theta: monomial " + m.key() + " exceeds degree " +
                                  std::to_string(basis.d()));
    }
    theta[*j] = c;
  }
  return theta;
}

// --- norms ----------------------------------------------------------------------

double monomial_norm(const PolyCoeffs& f) {
  double s = 0.0;
  for (const auto& [m, c] : f.terms()) s += c * c;
  return std::sqrt(s);
}

double l2_cube_norm(const PolyCoeffs& f) {
  // E[x^k] under Unif[-1,1] is 1/(k+1) for even k and 0 for odd k.
  double s = 0.0;
  for (const auto& [ma, ca] : f.terms()) {
    for (const auto& [mb, cb] : f.terms()) {
      double mom = 1.0;
      for (std::size_t i = 0; i < f.n(); ++i) {
        const int k = ma[i] + mb[i];
        if (k % 2) {
          mom = 0.0;
          break;
        }
        mom /= (k + 1);
      }
      s += ca * cb * mom;
    }
  }
  return std::sqrt(std::max(s, 0.0));
}

Check check_mon_l2_bound(const PolyCoeffs& f, std::size_t n, int d) {
  if (f.degree() > d) throw std::invalid_argument("check_mon_l2_bound: degree(f) exceeds d");
  if (f.n() != n) throw std::invalid_argument("check_mon_l2_bound: dimension mismatch");
  const double mn = monomial_norm(f);
  const double l2 = l2_cube_norm(f);
  Check c;
  c.name = "mon_l2";
  c.lhs = mn * mn;
  c.rhs = binomial(static_cast<int>(n) + d, d) * std::pow(4.0 * std::numbers::e, d) * l2 * l2;
  c.holds = c.lhs <= c.rhs * (1.0 + 1e-12);
  return c;
}

double monomial_lipschitz_bound(int d, double R) { return d * std::pow(R, d - 1); }

}  // namespace polyscore
