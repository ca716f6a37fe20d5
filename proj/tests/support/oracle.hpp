#pragma once

// Brute-force reference computations used only by the tests. Everything here
// works from the raw probability tables or raw data vectors and shares no code
// with the library's estimators or population routines.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <tuple>
#include <vector>

#include "sivwate/dataset.hpp"
#include "sivwate/dgp.hpp"

namespace oracle {

using sivwate::DgpTables;
using sivwate::ObservedDataset;

// One atom of the full joint law over (X, U, Z, D, Y(0), Y(1)); Y(0) and Y(1)
// are taken independent given (X, U), which leaves every marginal unchanged.
struct Atom {
  std::size_t x, u;
  int z, d;
  std::size_t k0, k1;
  double p;
};

inline std::vector<Atom> enumerate(const DgpTables& t) {
  std::vector<Atom> atoms;
  const std::size_t ny = t.y_support.size();
  for (std::size_t x = 0; x < t.x_support.size(); ++x)
    for (std::size_t u = 0; u < t.u_support.size(); ++u) {
      const double pxu = t.p_xu(x, u);
      if (pxu == 0) continue;
      for (int z = 0; z < 2; ++z) {
        const double pz = z ? t.e_z[x] : 1 - t.e_z[x];
        for (int d = 0; d < 2; ++d) {
          const double pd = d ? t.p_d[z](x, u) : 1 - t.p_d[z](x, u);
          for (std::size_t k0 = 0; k0 < ny; ++k0)
            for (std::size_t k1 = 0; k1 < ny; ++k1) {
              const double p = pxu * pz * pd * t.law_y[0][x][u][k0] * t.law_y[1][x][u][k1];
              if (p > 0) atoms.push_back({x, u, z, d, k0, k1, p});
            }
        }
      }
    }
  return atoms;
}

// P(D = 1 | Z = z, X = x, U = u) recomputed from the joint.
inline double latent_rate(const std::vector<Atom>& atoms, int z, std::size_t x, std::size_t u) {
  double num = 0, den = 0;
  for (const auto& a : atoms)
    if (a.z == z && a.x == x && a.u == u) {
      den += a.p;
      if (a.d == 1) num += a.p;
    }
  return den > 0 ? num / den : 0.0;
}

inline double weight(const std::vector<Atom>& atoms, std::size_t x, std::size_t u) {
  return latent_rate(atoms, 1, x, u) - latent_rate(atoms, 0, x, u);
}

// Weighted-law expectation E_Q[h(Y(0), Y(1), X)] with weights w(x, u);
// `keep` restricts to a subset of strata.
inline double weighted_mean(
    const DgpTables& t, const std::function<double(double, double, std::size_t)>& h,
    const std::function<bool(std::size_t, std::size_t, double)>& keep = nullptr) {
  const auto atoms = enumerate(t);
  std::map<std::pair<std::size_t, std::size_t>, double> w;
  double num = 0, den = 0;
  for (const auto& a : atoms) {
    auto key = std::pair{a.x, a.u};
    if (!w.count(key)) w[key] = weight(atoms, a.x, a.u);
    const double wt = w[key];
    if (keep && !keep(a.x, a.u, wt)) continue;
    num += a.p * wt * h(t.y_support[a.k0], t.y_support[a.k1], a.x);
    den += a.p * wt;
  }
  return num / den;
}

inline double sivwate(const DgpTables& t) {
  return weighted_mean(t, [](double y0, double y1, std::size_t) { return y1 - y0; });
}

// lambda = -E[w 1{w < 0}] / E[w]
inline double lambda(const DgpTables& t) {
  const auto atoms = enumerate(t);
  double neg = 0, all = 0;
  for (const auto& a : atoms) {
    const double wt = weight(atoms, a.x, a.u);
    all += a.p * wt;
    if (wt < 0) neg += a.p * wt;
  }
  return -neg / all;
}

// Observable joint P(X = x, Z = z, D = d, Y = y_k).
using Observable = std::map<std::tuple<std::size_t, int, int, std::size_t>, double>;

inline Observable observable(const DgpTables& t) {
  Observable obs;
  for (const auto& a : enumerate(t)) obs[{a.x, a.z, a.d, a.d ? a.k1 : a.k0}] += a.p;
  return obs;
}

enum class Arm { treated, untreated, difference };

inline double arm_value(Arm arm, int d, double gy) {
  switch (arm) {
    case Arm::treated: return d * gy;
    case Arm::untreated: return -(1 - d) * gy;
    case Arm::difference: return gy;
  }
  return 0;
}

// Regression form: sum_x P(x) [E(f | Z=1, x) - E(f | Z=0, x)] over the same for D.
inline double regression_form(const DgpTables& t, const std::function<double(double)>& g, Arm arm) {
  const auto obs = observable(t);
  const std::size_t nx = t.x_support.size();
  std::vector<double> px(nx, 0), pzx[2] = {std::vector<double>(nx, 0), std::vector<double>(nx, 0)};
  std::vector<double> f[2] = {std::vector<double>(nx, 0), std::vector<double>(nx, 0)};
  std::vector<double> dd[2] = {std::vector<double>(nx, 0), std::vector<double>(nx, 0)};
  for (const auto& [key, p] : obs) {
    const auto [x, z, d, k] = key;
    px[x] += p;
    pzx[z][x] += p;
    f[z][x] += p * arm_value(arm, d, g(t.y_support[k]));
    dd[z][x] += p * d;
  }
  double num = 0, den = 0;
  for (std::size_t x = 0; x < nx; ++x) {
    if (px[x] == 0) continue;
    num += px[x] * (f[1][x] / pzx[1][x] - f[0][x] / pzx[0][x]);
    den += px[x] * (dd[1][x] / pzx[1][x] - dd[0][x] / pzx[0][x]);
  }
  return num / den;
}

// Weighting form with kappa = (Z - e(X)) / (e(X)(1 - e(X))).
inline double weighting_form(const DgpTables& t, const std::function<double(double)>& g, Arm arm) {
  const auto obs = observable(t);
  double num = 0, den = 0;
  for (const auto& [key, p] : obs) {
    const auto [x, z, d, k] = key;
    const double e = t.e_z[x];
    const double kappa = (z - e) / (e * (1 - e));
    num += p * kappa * arm_value(arm, d, g(t.y_support[k]));
    den += p * kappa * d;
  }
  return num / den;
}

// Complier-average effect in a deterministic-compliance process (U labels
// "never", "always", "complier", "defier").
inline double complier_late(const DgpTables& t) {
  double num = 0, den = 0;
  for (std::size_t x = 0; x < t.x_support.size(); ++x)
    for (std::size_t u = 0; u < t.u_support.size(); ++u) {
      if (t.u_support[u] != "complier") continue;
      double m0 = 0, m1 = 0;
      for (std::size_t k = 0; k < t.y_support.size(); ++k) {
        m0 += t.law_y[0][x][u][k] * t.y_support[k];
        m1 += t.law_y[1][x][u][k] * t.y_support[k];
      }
      num += t.p_xu(x, u) * (m1 - m0);
      den += t.p_xu(x, u);
    }
  return num / den;
}

// E[Y(1) - Y(0) | x] by enumeration.
inline double conditional_ate(const DgpTables& t, std::size_t x) {
  double num = 0, den = 0;
  for (const auto& a : enumerate(t))
    if (a.x == x) {
      num += a.p * (t.y_support[a.k1] - t.y_support[a.k0]);
      den += a.p;
    }
  return num / den;
}

inline double global_ate(const DgpTables& t) {
  double s = 0;
  for (const auto& a : enumerate(t)) s += a.p * (t.y_support[a.k1] - t.y_support[a.k0]);
  return s;
}

// Wald ratio straight from the data vectors.
inline double wald(const ObservedDataset& data) {
  double y[2] = {0, 0}, d[2] = {0, 0}, n[2] = {0, 0};
  for (std::size_t i = 0; i < data.size(); ++i) {
    y[data.z(i)] += data.y(i);
    d[data.z(i)] += data.d(i);
    n[data.z(i)] += 1;
  }
  return (y[1] / n[1] - y[0] / n[0]) / (d[1] / n[1] - d[0] / n[0]);
}

// Sort-based empirical quantile with linear interpolation.
inline double sorted_quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t i = static_cast<std::size_t>(pos);
  if (i + 1 == v.size()) return v[i];
  return v[i] * (1 - (pos - static_cast<double>(i))) + v[i + 1] * (pos - static_cast<double>(i));
}

}  // namespace oracle
