#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "hintcolor/colorspace.hpp"
#include "hintcolor/hints.hpp"

namespace hintcolor {

// Luminance-affinity edit propagation used as the classical comparator.
struct LevinConfig {
  int window_radius = 1;
  // Floor on local variance of L/100, keeps flat regions from producing
  // degenerate affinities.
  double variance_floor = 1e-4;
  // Relative residual ||Ax-b|| / ||b|| at which the iterative solve stops.
  double solver_tol = 1e-6;
  int max_iter = 10000;
};

class SolverNotConverged : public std::runtime_error {
 public:
  SolverNotConverged(double achieved, int iterations)
      : std::runtime_error("edit propagation did not converge: relative residual " +
                           std::to_string(achieved) + " after " + std::to_string(iterations) +
                           " iterations"),
        achieved_(achieved),
        iterations_(iterations) {}
  double achieved_residual() const { return achieved_; }
  int iterations() const { return iterations_; }

 private:
  double achieved_;
  int iterations_;
};

/// Row-normalized neighbor affinities W (zero diagonal), n x n with n = H*W.
Eigen::SparseMatrix<double, Eigen::RowMajor> levin_affinity(const GrayImage& gray,
                                                            const LevinConfig& cfg);

/// Propagates the revealed colors: every unrevealed pixel equals the affinity
/// weighted mean of its neighbors, revealed pixels keep their hint exactly.
/// With no hints the result is all zeros. Throws SolverNotConverged.
AbImage propagate_edits(const GrayImage& gray, const LocalHints& hints, const LevinConfig& cfg = {});

/// Double-precision solution, interleaved (a,b) per pixel.
std::vector<double> propagate_edits_f64(const GrayImage& gray, const LocalHints& hints,
                                        const LevinConfig& cfg = {});

/// Value of the row-substituted quadratic form, summed over both channels:
/// sum over free pixels of (c(r) - sum_s w_rs c(s))^2 plus squared deviation
/// from the hint at revealed pixels.
double residual(const GrayImage& gray, const LocalHints& hints, const AbImage& result,
                const LevinConfig& cfg = {});

/// Squared norm of the right-hand side of the substituted system (sum of
/// squared hint values), the natural scale for residual().
double residual_scale(const LocalHints& hints);

}  // namespace hintcolor
