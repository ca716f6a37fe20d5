#include "sivwate/dgp_builders.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "sivwate/error.hpp"
#include "sivwate/rng.hpp"

namespace sivwate {

namespace {

constexpr const char* kOrigin = "dgp_oracle";

[[noreturn]] void invalid(const std::string& what) {
  throw Error(ErrorKind::validation, kOrigin, what);
}

std::vector<double> delta(const std::vector<double>& support, double value) {
  std::vector<double> law(support.size(), 0.0);
  const auto it = std::find(support.begin(), support.end(), value);
  law[static_cast<std::size_t>(it - support.begin())] = 1.0;
  return law;
}

std::vector<double> random_simplex(Engine& gen, std::size_t k) {
  std::vector<double> v(k);
  double s = 0;
  for (auto& e : v) {
    e = uniform(gen, 0.05, 1.0);
    s += e;
  }
  for (auto& e : v) e /= s;
  return v;
}

}  // namespace

LatentDgp make_dcc_dgp(const DccSpec& spec) {
  const std::size_t nx = spec.x_support.size();
  if (spec.p_x.size() != nx || spec.e_z.size() != nx || spec.class_mix.size() != nx)
    invalid("DCC spec: p_x, e_z and class_mix need one entry per x");
  for (int d = 0; d < 2; ++d)
    if (spec.law_y[d].size() != nx) invalid("DCC spec: law_y needs one block per x");

  DgpTables t;
  t.schema = spec.schema;
  t.x_support = spec.x_support;
  t.u_support = {"never", "always", "complier", "defier"};
  t.p_xu = Matrix(nx, 4);
  t.e_z = spec.e_z;
  t.p_d = {Matrix(nx, 4), Matrix(nx, 4)};
  t.y_support = spec.y_support;
  for (int d = 0; d < 2; ++d) t.law_y[d].assign(nx, std::vector<std::vector<double>>(4));

  for (std::size_t x = 0; x < nx; ++x) {
    double sum = 0;
    for (std::size_t c = 0; c < 4; ++c) {
      const double share = spec.class_mix[x][c];
      if (!(share >= 0.0)) {
        std::ostringstream s;
        s << "class_mix[" << x << "][" << c << "]: negative proportion " << share;
        invalid(s.str());
      }
      sum += share;
      t.p_xu(x, c) = spec.p_x[x] * share;
      for (int d = 0; d < 2; ++d) t.law_y[d][x][c] = spec.law_y[d][x][c];
    }
    if (std::abs(sum - 1.0) > 1e-12) {
      std::ostringstream s;
      s.precision(17);
      s << "class_mix[" << x << "]: proportions sum to " << sum << ", expected 1";
      invalid(s.str());
    }
    // (P(D=1|Z=0), P(D=1|Z=1)) per class
    constexpr double take[4][2] = {{0, 0}, {1, 1}, {0, 1}, {1, 0}};
    for (std::size_t c = 0; c < 4; ++c) {
      t.p_d[0](x, c) = take[c][0];
      t.p_d[1](x, c) = take[c][1];
    }
  }
  return LatentDgp(std::move(t));
}

LatentDgp make_bound_attaining_dgp(const BoundAttainingSpec& spec) {
  const std::size_t nx = spec.x_support.size();
  if (spec.p_x.size() != nx || spec.sivwate_x.size() != nx ||
      spec.compliance_share_x.size() != nx)
    invalid("bound-attaining spec: p_x, sivwate_x and compliance_share_x need one entry per x");
  if (!spec.e_z.empty() && spec.e_z.size() != nx)
    invalid("bound-attaining spec: e_z needs one entry per x");
  if (!(spec.r >= 0.0) || !std::isfinite(spec.r)) invalid("bound-attaining spec: r must be >= 0");
  for (std::size_t x = 0; x < nx; ++x) {
    const double s = spec.compliance_share_x[x];
    if (!(s > 0.0 && s <= 1.0)) {
      std::ostringstream m;
      m << "compliance_share_x[" << x << "] = " << s << " outside (0, 1]";
      invalid(m.str());
    }
  }

  const double sign = spec.side == BoundSide::lower ? -1.0 : 1.0;
  std::set<double> support{0.0};
  for (std::size_t x = 0; x < nx; ++x) {
    support.insert(spec.sivwate_x[x]);
    support.insert(spec.sivwate_x[x] + sign * spec.r);
  }

  DgpTables t;
  t.schema = spec.schema;
  t.x_support = spec.x_support;
  t.u_support = {"non-complier", "complier"};
  t.p_xu = Matrix(nx, 2);
  t.e_z = spec.e_z.empty() ? std::vector<double>(nx, 0.5) : spec.e_z;
  t.p_d = {Matrix(nx, 2), Matrix(nx, 2)};
  t.y_support.assign(support.begin(), support.end());
  for (int d = 0; d < 2; ++d) t.law_y[d].assign(nx, std::vector<std::vector<double>>(2));

  for (std::size_t x = 0; x < nx; ++x) {
    const double share = spec.compliance_share_x[x];
    t.p_xu(x, 1) = spec.p_x[x] * share;
    t.p_xu(x, 0) = spec.p_x[x] * (1.0 - share);
    // U = 0 mixes always and never takers evenly, so w(x, 0) = 0.
    t.p_d[0](x, 0) = 0.5;
    t.p_d[1](x, 0) = 0.5;
    t.p_d[0](x, 1) = 0.0;
    t.p_d[1](x, 1) = 1.0;
    // Y(0) = 0, so Y(1) is the stratum effect.
    t.law_y[0][x][0] = delta(t.y_support, 0.0);
    t.law_y[0][x][1] = delta(t.y_support, 0.0);
    t.law_y[1][x][1] = delta(t.y_support, spec.sivwate_x[x]);
    t.law_y[1][x][0] = delta(t.y_support, spec.sivwate_x[x] + sign * spec.r);
  }
  return LatentDgp(std::move(t));
}

LatentDgp random_dgp(const RandomDgpOptions& o) {
  const auto [nx, nu, ny] = o.sizes;
  if (nx == 0 || nu == 0 || ny == 0)
    throw Error(ErrorKind::generation, kOrigin, "random_dgp sizes must be >= 1");
  if (o.monotonicity == Monotonicity::violate && nx * nu < 2)
    throw Error(ErrorKind::generation, kOrigin,
                "a violating DGP with positive IV strength needs at least two strata");

  Engine gen = make_engine(o.seed, 0xD6E);
  for (std::size_t attempt = 0; attempt < o.max_attempts; ++attempt) {
    DgpTables t;
    t.schema = CovariateSchema({Covariate::continuous("x")});
    for (std::size_t x = 0; x < nx; ++x) t.x_support.push_back({static_cast<double>(x)});
    for (std::size_t u = 0; u < nu; ++u) t.u_support.push_back("u" + std::to_string(u));

    const auto p = random_simplex(gen, nx * nu);
    t.p_xu = Matrix(nx, nu);
    t.p_xu.data = p;
    for (std::size_t x = 0; x < nx; ++x) t.e_z.push_back(uniform(gen, 0.2, 0.8));

    t.p_d = {Matrix(nx, nu), Matrix(nx, nu)};
    for (std::size_t x = 0; x < nx; ++x)
      for (std::size_t u = 0; u < nu; ++u) {
        double a = uniform01(gen), b = uniform01(gen);
        if (o.monotonicity == Monotonicity::enforce && a < b) std::swap(a, b);
        t.p_d[1](x, u) = a;
        t.p_d[0](x, u) = b;
      }

    for (std::size_t k = 0; k < ny; ++k)
      t.y_support.push_back(static_cast<double>(k) + uniform(gen, -0.3, 0.3));

    bool reject = false;
    for (int d = 0; d < 2; ++d) t.law_y[d].assign(nx, std::vector<std::vector<double>>(nu));
    for (std::size_t x = 0; x < nx; ++x)
      for (std::size_t u = 0; u < nu; ++u) {
        auto l0 = random_simplex(gen, ny);
        auto l1 = random_simplex(gen, ny);
        if (o.positive_effects) {
          double m0 = 0, m1 = 0;
          for (std::size_t k = 0; k < ny; ++k) {
            m0 += l0[k] * t.y_support[k];
            m1 += l1[k] * t.y_support[k];
          }
          if (std::abs(m1 - m0) < 1e-3) reject = true;
          if (m1 < m0) std::swap(l0, l1);
        }
        t.law_y[0][x][u] = std::move(l0);
        t.law_y[1][x][u] = std::move(l1);
      }
    if (reject) continue;

    double strength = 0;
    bool violated = false;
    for (std::size_t x = 0; x < nx; ++x)
      for (std::size_t u = 0; u < nu; ++u) {
        const double w = t.p_d[1](x, u) - t.p_d[0](x, u);
        strength += t.p_xu(x, u) * w;
        if (w < -0.02) violated = true;
      }
    if (strength < o.min_iv_strength) continue;
    if (o.monotonicity == Monotonicity::violate && !violated) continue;
    return LatentDgp(std::move(t));
  }
  throw Error(ErrorKind::generation, kOrigin,
              "random_dgp: constraints not met after " + std::to_string(o.max_attempts) +
                  " attempts");
}

LatentDgp random_dgp(DgpSizes sizes, std::uint64_t seed, bool enforce_monotonicity) {
  RandomDgpOptions o;
  o.sizes = sizes;
  o.seed = seed;
  if (enforce_monotonicity) {
    o.monotonicity = Monotonicity::enforce;
  } else {
    o.monotonicity = Monotonicity::any;
    o.min_iv_strength = -std::numeric_limits<double>::infinity();
  }
  return random_dgp(o);
}

LatentDgp random_dcc_dgp(std::uint64_t seed, std::size_t nx, std::size_t ny, bool defiers) {
  if (nx == 0 || ny == 0) throw Error(ErrorKind::generation, kOrigin, "random_dcc_dgp sizes must be >= 1");
  Engine gen = make_engine(seed, 0xDCC);
  DccSpec spec;
  spec.schema = CovariateSchema({Covariate::continuous("x")});
  for (std::size_t x = 0; x < nx; ++x) spec.x_support.push_back({static_cast<double>(x)});
  spec.p_x = random_simplex(gen, nx);
  for (std::size_t x = 0; x < nx; ++x) spec.e_z.push_back(uniform(gen, 0.2, 0.8));
  for (std::size_t k = 0; k < ny; ++k)
    spec.y_support.push_back(static_cast<double>(k) + uniform(gen, -0.3, 0.3));
  for (std::size_t x = 0; x < nx; ++x) {
    auto mix = random_simplex(gen, 4);
    if (!defiers) {
      mix[2] += mix[3];
      mix[3] = 0.0;
    } else if (mix[3] >= mix[2]) {
      std::swap(mix[2], mix[3]);
    }
    spec.class_mix.push_back({mix[0], mix[1], mix[2], mix[3]});
    for (int d = 0; d < 2; ++d) {
      std::array<std::vector<double>, 4> laws;
      for (auto& l : laws) l = random_simplex(gen, ny);
      spec.law_y[d].push_back(std::move(laws));
    }
  }
  return make_dcc_dgp(spec);
}

LatentDgp collapse_confounder(const LatentDgp& dgp) {
  const std::size_t nx = dgp.x_count(), nu = dgp.u_count();
  DgpTables t;
  t.schema = dgp.schema();
  t.x_support = dgp.tables().x_support;
  t.u_support = {"pooled"};
  t.p_xu = Matrix(nx, 1);
  t.e_z = dgp.tables().e_z;
  t.p_d = {Matrix(nx, 1), Matrix(nx, 1)};
  t.y_support = dgp.tables().y_support;
  for (int d = 0; d < 2; ++d) t.law_y[d].assign(nx, std::vector<std::vector<double>>(1));

  for (std::size_t x = 0; x < nx; ++x) {
    t.p_xu(x, 0) = dgp.p_x(x);
    std::size_t ref = 0;
    while (ref < nu && dgp.p_xu(x, ref) == 0) ++ref;
    if (ref == nu) ref = 0;
    for (std::size_t u = 0; u < nu; ++u) {
      if (dgp.p_xu(x, u) == 0) continue;
      for (int d = 0; d < 2; ++d) {
        const auto a = dgp.law_y(d, x, ref);
        const auto b = dgp.law_y(d, x, u);
        for (std::size_t k = 0; k < a.size(); ++k)
          if (std::abs(a[k] - b[k]) > 1e-12)
            invalid("collapse_confounder: outcome law of Y(" + std::to_string(d) +
                    ") varies with u at x index " + std::to_string(x));
      }
    }
    for (int z = 0; z < 2; ++z) {
      double pd = 0;
      if (dgp.p_x(x) > 0)
        for (std::size_t u = 0; u < nu; ++u) pd += dgp.p_u_given_x(x, u) * dgp.p_d(z, x, u);
      else
        pd = dgp.p_d(z, x, 0);
      t.p_d[z](x, 0) = std::clamp(pd, 0.0, 1.0);
    }
    for (int d = 0; d < 2; ++d) {
      const auto law = dgp.law_y(d, x, ref);
      t.law_y[d][x][0].assign(law.begin(), law.end());
    }
  }
  return LatentDgp(std::move(t));
}

}  // namespace sivwate
