#include "hintcolor/levin.hpp"

#include <cmath>
#include <vector>

#include <Eigen/IterativeLinearSolvers>

namespace hintcolor {

Eigen::SparseMatrix<double, Eigen::RowMajor> levin_affinity(const GrayImage& gray,
                                                            const LevinConfig& cfg) {
  if (cfg.window_radius < 1) throw std::invalid_argument("window_radius must be >= 1");
  const int h = gray.height, w = gray.width;
  const int rad = cfg.window_radius;
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(h) * w * (2 * rad + 1) * (2 * rad + 1));
  std::vector<std::pair<int, double>> row;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int r = y * w + x;
      double sum = 0.0;
      int count = 0;
      for (int yy = std::max(0, y - rad); yy <= std::min(h - 1, y + rad); ++yy) {
        for (int xx = std::max(0, x - rad); xx <= std::min(w - 1, x + rad); ++xx) {
          sum += gray.at(yy, xx) / 100.0;
          ++count;
        }
      }
      const double mean = sum / count;
      // Two-pass variance: the system is ill-conditioned enough that the
      // cancellation in E[l^2] - mean^2 shows up in the solution.
      double ss = 0.0;
      for (int yy = std::max(0, y - rad); yy <= std::min(h - 1, y + rad); ++yy) {
        for (int xx = std::max(0, x - rad); xx <= std::min(w - 1, x + rad); ++xx) {
          const double dl = gray.at(yy, xx) / 100.0 - mean;
          ss += dl * dl;
        }
      }
      const double var = std::max(ss / count, cfg.variance_floor);
      row.clear();
      double total = 0.0;
      for (int yy = std::max(0, y - rad); yy <= std::min(h - 1, y + rad); ++yy) {
        for (int xx = std::max(0, x - rad); xx <= std::min(w - 1, x + rad); ++xx) {
          if (yy == y && xx == x) continue;
          const double d = (gray.at(yy, xx) - gray.at(y, x)) / 100.0;
          const double wt = std::exp(-d * d / (2.0 * var));
          row.emplace_back(yy * w + xx, wt);
          total += wt;
        }
      }
      if (total <= 0.0) continue;
      for (const auto& [s, wt] : row) triplets.emplace_back(r, s, wt / total);
    }
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> W(static_cast<Eigen::Index>(h) * w,
                                                 static_cast<Eigen::Index>(h) * w);
  W.setFromTriplets(triplets.begin(), triplets.end());
  return W;
}

std::vector<double> propagate_edits_f64(const GrayImage& gray, const LocalHints& hints, const LevinConfig& cfg) {
  if (gray.height != hints.height || gray.width != hints.width) {
    throw std::invalid_argument("propagate_edits: gray and hints dimensions differ");
  }
  const auto n = static_cast<Eigen::Index>(gray.pixels());
  std::vector<double> out(static_cast<std::size_t>(n) * 2, 0.0);
  if (hints.revealed() == 0) return out;

  // Revealed pixels are substituted out; the free pixels satisfy
  // (I - W_ff) c_f = W_fc c_c.
  std::vector<Eigen::Index> free_index(n, -1);
  std::vector<Eigen::Index> free_pixels;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (hints.mask[i] == 0.f) {
      free_index[i] = static_cast<Eigen::Index>(free_pixels.size());
      free_pixels.push_back(i);
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (hints.mask[i] != 0.f) {
      out[2 * i] = hints.ab[2 * i];
      out[2 * i + 1] = hints.ab[2 * i + 1];
    }
  }
  if (free_pixels.empty()) return out;

  const auto W = levin_affinity(gray, cfg);
  const auto m = static_cast<Eigen::Index>(free_pixels.size());
  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::MatrixX2d rhs = Eigen::MatrixX2d::Zero(m, 2);
  for (Eigen::Index k = 0; k < m; ++k) {
    const Eigen::Index r = free_pixels[k];
    triplets.emplace_back(k, k, 1.0);
    for (decltype(W)::InnerIterator it(W, r); it; ++it) {
      const Eigen::Index s = it.col();
      if (free_index[s] >= 0) {
        triplets.emplace_back(k, free_index[s], -it.value());
      } else {
        rhs(k, 0) += it.value() * hints.ab[2 * s];
        rhs(k, 1) += it.value() * hints.ab[2 * s + 1];
      }
    }
  }
  Eigen::SparseMatrix<double> A(m, m);
  A.setFromTriplets(triplets.begin(), triplets.end());

  Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, Eigen::DiagonalPreconditioner<double>> solver;
  solver.setTolerance(cfg.solver_tol);
  solver.setMaxIterations(cfg.max_iter);
  solver.compute(A);
  for (int c = 0; c < 2; ++c) {
    const Eigen::VectorXd b = rhs.col(c);
    if (b.squaredNorm() == 0.0) continue;
    Eigen::VectorXd sol = solver.solve(b);
    if (solver.info() != Eigen::Success) {
      throw SolverNotConverged(solver.error(), static_cast<int>(solver.iterations()));
    }
    // The recurrence residual drifts from the true one; refine against the
    // true residual until it meets the tolerance.
    for (int pass = 0; pass < 4; ++pass) {
      const Eigen::VectorXd r = b - A * sol;
      if (r.norm() <= cfg.solver_tol * b.norm()) break;
      sol += solver.solve(r);
    }
    for (Eigen::Index k = 0; k < m; ++k) {
      out[2 * free_pixels[k] + c] = sol[k];
    }
  }
  return out;
}

AbImage propagate_edits(const GrayImage& gray, const LocalHints& hints, const LevinConfig& cfg) {
  const auto sol = propagate_edits_f64(gray, hints, cfg);
  AbImage out(gray.height, gray.width);
  for (std::size_t i = 0; i < sol.size(); ++i) {
    // Revealed pixels were copied from float hints, so this is bit-exact there.
    out.ab[i] = static_cast<float>(sol[i]);
  }
  return out;
}

double residual(const GrayImage& gray, const LocalHints& hints, const AbImage& result,
                const LevinConfig& cfg) {
  if (result.height != gray.height || result.width != gray.width ||
      hints.height != gray.height || hints.width != gray.width) {
    throw std::invalid_argument("residual: dimension mismatch");
  }
  const auto n = static_cast<Eigen::Index>(gray.pixels());
  const auto W = levin_affinity(gray, cfg);
  double total = 0.0;
  for (int c = 0; c < 2; ++c) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = result.ab[2 * i + c];
    const Eigen::VectorXd Wv = W * v;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double r = hints.mask[i] != 0.f ? v[i] - hints.ab[2 * i + c] : v[i] - Wv[i];
      total += r * r;
    }
  }
  return total;
}

double residual_scale(const LocalHints& hints) {
  double s = 0.0;
  for (std::size_t i = 0; i < hints.pixels(); ++i) {
    if (hints.mask[i] == 0.f) continue;
    s += hints.ab[2 * i] * hints.ab[2 * i] + hints.ab[2 * i + 1] * hints.ab[2 * i + 1];
  }
  return s;
}

}  // namespace hintcolor
