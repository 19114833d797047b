#pragma once

// Exact solution of the 1D Riemann problem for an ideal gas, used as an
// oracle for the finite-volume solver.

#include <cmath>
#include <stdexcept>

namespace oracle {

struct Primitive {
  double rho;
  double u;
  double p;
};

class ExactRiemann {
 public:
  ExactRiemann(Primitive left, Primitive right, double gamma)
      : l_(left), r_(right), g_(gamma) {
    cl_ = std::sqrt(g_ * l_.p / l_.rho);
    cr_ = std::sqrt(g_ * r_.p / r_.rho);
    solve_star();
  }

  double p_star() const { return p_star_; }
  double u_star() const { return u_star_; }

  /// State at similarity coordinate s = x / t.
  Primitive sample(double s) const {
    if (s <= u_star_) {
      if (p_star_ > l_.p) {  // left shock
        const double q = p_star_ / l_.p;
        const double sl = l_.u - cl_ * std::sqrt((g_ + 1) / (2 * g_) * q +
                                                 (g_ - 1) / (2 * g_));
        if (s <= sl) return l_;
        const double rho = l_.rho * (q + (g_ - 1) / (g_ + 1)) /
                           ((g_ - 1) / (g_ + 1) * q + 1);
        return {rho, u_star_, p_star_};
      }
      const double c_star = cl_ * std::pow(p_star_ / l_.p, (g_ - 1) / (2 * g_));
      const double head = l_.u - cl_;
      const double tail = u_star_ - c_star;
      if (s <= head) return l_;
      if (s >= tail) {
        return {l_.rho * std::pow(p_star_ / l_.p, 1 / g_), u_star_, p_star_};
      }
      const double a = 2 / (g_ + 1) + (g_ - 1) / ((g_ + 1) * cl_) * (l_.u - s);
      return {l_.rho * std::pow(a, 2 / (g_ - 1)),
              2 / (g_ + 1) * (cl_ + (g_ - 1) / 2 * l_.u + s),
              l_.p * std::pow(a, 2 * g_ / (g_ - 1))};
    }
    if (p_star_ > r_.p) {  // right shock
      const double q = p_star_ / r_.p;
      const double sr = r_.u + cr_ * std::sqrt((g_ + 1) / (2 * g_) * q +
                                               (g_ - 1) / (2 * g_));
      if (s >= sr) return r_;
      const double rho = r_.rho * (q + (g_ - 1) / (g_ + 1)) /
                         ((g_ - 1) / (g_ + 1) * q + 1);
      return {rho, u_star_, p_star_};
    }
    const double c_star = cr_ * std::pow(p_star_ / r_.p, (g_ - 1) / (2 * g_));
    const double head = r_.u + cr_;
    const double tail = u_star_ + c_star;
    if (s >= head) return r_;
    if (s <= tail) {
      return {r_.rho * std::pow(p_star_ / r_.p, 1 / g_), u_star_, p_star_};
    }
    const double a = 2 / (g_ + 1) - (g_ - 1) / ((g_ + 1) * cr_) * (r_.u - s);
    return {r_.rho * std::pow(a, 2 / (g_ - 1)),
            2 / (g_ + 1) * (-cr_ + (g_ - 1) / 2 * r_.u + s),
            r_.p * std::pow(a, 2 * g_ / (g_ - 1))};
  }

 private:
  // Pressure function of one side and its derivative.
  void side(double p, const Primitive& k, double c, double& f, double& df) const {
    if (p > k.p) {
      const double a = 2 / ((g_ + 1) * k.rho);
      const double b = (g_ - 1) / (g_ + 1) * k.p;
      const double root = std::sqrt(a / (p + b));
      f = (p - k.p) * root;
      df = root * (1 - 0.5 * (p - k.p) / (b + p));
    } else {
      const double ratio = p / k.p;
      f = 2 * c / (g_ - 1) * (std::pow(ratio, (g_ - 1) / (2 * g_)) - 1);
      df = 1 / (k.rho * c) * std::pow(ratio, -(g_ + 1) / (2 * g_));
    }
  }

  void solve_star() {
    double p = 0.5 * (l_.p + r_.p);
    for (int it = 0; it < 100; ++it) {
      double fl, dfl, fr, dfr;
      side(p, l_, cl_, fl, dfl);
      side(p, r_, cr_, fr, dfr);
      const double next = std::max(1e-12, p - (fl + fr + r_.u - l_.u) / (dfl + dfr));
      if (std::abs(next - p) < 1e-14 * (next + p)) {
        p = next;
        break;
      }
      p = next;
    }
    double fl, dfl, fr, dfr;
    side(p, l_, cl_, fl, dfl);
    side(p, r_, cr_, fr, dfr);
    p_star_ = p;
    u_star_ = 0.5 * (l_.u + r_.u) + 0.5 * (fr - fl);
  }

  Primitive l_, r_;
  double g_;
  double cl_ = 0, cr_ = 0;
  double p_star_ = 0, u_star_ = 0;
};

}  // namespace oracle
