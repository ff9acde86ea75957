#pragma once
// Brute-force reference computations used only by tests. They avoid the
// library's code paths on purpose: plain grids plus local zoom.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

// Dual objective rho*l + r*|soft(g,l)|_2 minimized over a grid in
// [0, |g|_inf], then repeatedly zoomed around the best grid point.
inline double support_lambda_grid(const Eigen::VectorXd& g, double rho, double r) {
  auto f = [&](double l) {
    double s = 0;
    for (int i = 0; i < g.size(); ++i) {
      const double m = std::max(std::abs(g[i]) - l, 0.0);
      s += m * m;
    }
    return rho * l + r * std::sqrt(s);
  };
  double a = 0.0, b = g.cwiseAbs().maxCoeff();
  double best = f(0.0);
  for (int round = 0; round < 60; ++round) {
    const int n = 2001;
    double arg = a;
    double val = f(a);
    for (int i = 0; i <= n; ++i) {
      const double l = a + (b - a) * i / n;
      const double v = f(l);
      if (v < val) {
        val = v;
        arg = l;
      }
    }
    best = std::min(best, val);
    const double w = (b - a) / n * 2;
    a = std::max(0.0, arg - w);
    b = arg + w;
    if (b - a < 1e-15) break;
  }
  return best;
}

// Maximize a continuous function of a unit direction in R^2 or R^3 by a
// coarse angular mesh followed by local zoom on the best cells.
inline double sphere_max(int d, const std::function<double(const Eigen::VectorXd&)>& f) {
  const double pi = std::numbers::pi;
  auto dir = [&](double th, double ph) {
    Eigen::VectorXd u(d);
    if (d == 2) {
      u << std::cos(th), std::sin(th);
    } else {
      u << std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th);
    }
    return u;
  };
  std::vector<std::pair<double, std::pair<double, double>>> cand;
  const int nt = d == 2 ? 20000 : 300;
  const int np = d == 2 ? 1 : 600;
  const double dt = d == 2 ? 2 * pi / nt : pi / nt;
  const double dp = 2 * pi / np;
  for (int i = 0; i < nt; ++i)
    for (int j = 0; j < np; ++j) {
      const double th = d == 2 ? i * dt : (i + 0.5) * dt;
      const double ph = j * dp;
      cand.push_back({f(dir(th, ph)), {th, ph}});
    }
  std::partial_sort(cand.begin(), cand.begin() + 30, cand.end(),
                    [](const auto& x, const auto& y) { return x.first > y.first; });
  double best = cand.front().first;
  for (int c = 0; c < 30; ++c) {
    double th = cand[c].second.first, ph = cand[c].second.second;
    double val = cand[c].first;
    double wt = dt, wp = dp;
    for (int round = 0; round < 50; ++round) {
      double bt = th, bp = ph;
      const int m = 10;
      for (int a = -m; a <= m; ++a)
        for (int b = (d == 2 ? 0 : -m); b <= (d == 2 ? 0 : m); ++b) {
          const double t2 = th + wt * a / m, p2 = ph + wp * b / m;
          const double v = f(dir(t2, p2));
          if (v > val) {
            val = v;
            bt = t2;
            bp = p2;
          }
        }
      th = bt;
      ph = bp;
      wt *= 0.4;
      wp *= 0.4;
    }
    best = std::max(best, val);
  }
  return best;
}

// sup <g,t> over rho*B_1 cap r*B_2: along direction u the feasible segment
// ends at min(rho/|u|_1, r/|u|_2).
inline double support_boundary_mesh(const Eigen::VectorXd& g, double rho, double r) {
  return sphere_max(static_cast<int>(g.size()), [&](const Eigen::VectorXd& u) {
    return g.dot(u) * std::min(rho / u.lpNorm<1>(), r / u.norm());
  });
}

// sup <g,Xt> over |t|_1 <= c, |Xt|_2 <= r, same radial parametrization.
inline double image_support_mesh(const Eigen::VectorXd& g, const Eigen::MatrixXd& x, double c, double r) {
  const Eigen::VectorXd b = x.transpose() * g;
  return sphere_max(static_cast<int>(b.size()), [&](const Eigen::VectorXd& u) {
    const double xn = (x * u).norm();
    const double s = xn > 0 ? std::min(c / u.lpNorm<1>(), r / xn) : c / u.lpNorm<1>();
    return std::max(0.0, b.dot(u) * s);
  });
}

// Brute-force minimum of f over a 3-d box mesh, then repeated zooms around
// the incumbent. `clip` maps a mesh point into the feasible set (identity for
// unconstrained problems).
inline double box_zoom_min3(const std::function<double(const Eigen::Vector3d&)>& f,
                            const std::function<Eigen::Vector3d(const Eigen::Vector3d&)>& clip, double half,
                            int n = 41, int rounds = 40) {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d best_t = clip(center);
  double best = f(best_t);
  for (int round = 0; round < rounds; ++round) {
    const double h = 2.0 * half / (n - 1);
    Eigen::Vector3d inc = best_t;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          const Eigen::Vector3d t =
              clip(center + Eigen::Vector3d(-half + i * h, -half + j * h, -half + k * h));
          const double v = f(t);
          if (v < best) {
            best = v;
            inc = t;
          }
        }
    best_t = inc;
    center = inc;
    half = 3.0 * h;
    if (round == 0) n = 13;
  }
  return best;
}

}  // namespace oracle
