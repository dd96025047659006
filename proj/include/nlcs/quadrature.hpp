#pragma once

#include <functional>

#include "nlcs/types.hpp"

namespace nlcs::quad {

using Fn1d = std::function<double(double)>;

// Adaptive Gauss-Kronrod (G7,K15) on [a,b]. Error control is
// |err| <= abs_tol + rel_tol * |integral|.
double integrate(const Fn1d& f, double a, double b, double rel_tol = 1e-10,
                 double abs_tol = 0.0, int max_depth = 40);

// log of integral of exp(log_f) over [a,b]; log_f may return -inf.
// Max-shifts by a coarse scan before the adaptive pass.
double integrate_log(const Fn1d& log_f, double a, double b,
                     double rel_tol = 1e-10, int scan_points = 512);

}  // namespace nlcs::quad
