#pragma once

#include <Eigen/Dense>
#include <cmath>

namespace etmpc {

// Forward-mode scalar carrying value, gradient and Hessian w.r.t. NV seed
// directions. Used to get exact first and second derivatives of the dynamics
// and stage costs through the RK4 step without hand-deriving Jacobians.
template <int NV>
struct Dual2 {
  using Grad = Eigen::Matrix<double, NV, 1>;
  using Hess = Eigen::Matrix<double, NV, NV>;

  double v = 0.0;
  Grad g = Grad::Zero();
  Hess h = Hess::Zero();

  Dual2() = default;
  Dual2(double value) : v(value) {}  // NOLINT(runtime/explicit): constants promote

  static Dual2 seed(double value, int index) {
    Dual2 d(value);
    d.g(index) = 1.0;
    return d;
  }

  Dual2 operator-() const {
    Dual2 r;
    r.v = -v;
    r.g = -g;
    r.h = -h;
    return r;
  }
};

template <int NV>
Dual2<NV> operator+(const Dual2<NV>& a, const Dual2<NV>& b) {
  Dual2<NV> r;
  r.v = a.v + b.v;
  r.g = a.g + b.g;
  r.h = a.h + b.h;
  return r;
}

template <int NV>
Dual2<NV> operator-(const Dual2<NV>& a, const Dual2<NV>& b) {
  Dual2<NV> r;
  r.v = a.v - b.v;
  r.g = a.g - b.g;
  r.h = a.h - b.h;
  return r;
}

template <int NV>
Dual2<NV> operator*(const Dual2<NV>& a, const Dual2<NV>& b) {
  Dual2<NV> r;
  r.v = a.v * b.v;
  r.g = a.g * b.v + b.g * a.v;
  r.h = a.h * b.v + b.h * a.v + a.g * b.g.transpose() + b.g * a.g.transpose();
  return r;
}

template <int NV>
Dual2<NV> operator/(const Dual2<NV>& a, const Dual2<NV>& b) {
  // From a = r*b: r.h = (a.h - r.g b.g' - b.g r.g' - r.v b.h) / b.v
  Dual2<NV> r;
  r.v = a.v / b.v;
  r.g = (a.g - r.v * b.g) / b.v;
  r.h = (a.h - r.g * b.g.transpose() - b.g * r.g.transpose() - r.v * b.h) / b.v;
  return r;
}

// mixed scalar/dual arithmetic
template <int NV>
Dual2<NV> operator+(double a, const Dual2<NV>& b) {
  return Dual2<NV>(a) + b;
}
template <int NV>
Dual2<NV> operator+(const Dual2<NV>& a, double b) {
  return a + Dual2<NV>(b);
}
template <int NV>
Dual2<NV> operator-(double a, const Dual2<NV>& b) {
  return Dual2<NV>(a) - b;
}
template <int NV>
Dual2<NV> operator-(const Dual2<NV>& a, double b) {
  return a - Dual2<NV>(b);
}
template <int NV>
Dual2<NV> operator*(double a, const Dual2<NV>& b) {
  Dual2<NV> r;
  r.v = a * b.v;
  r.g = a * b.g;
  r.h = a * b.h;
  return r;
}
template <int NV>
Dual2<NV> operator*(const Dual2<NV>& a, double b) {
  return b * a;
}
template <int NV>
Dual2<NV> operator/(const Dual2<NV>& a, double b) {
  return a * (1.0 / b);
}
template <int NV>
Dual2<NV> operator/(double a, const Dual2<NV>& b) {
  return Dual2<NV>(a) / b;
}

template <int NV>
Dual2<NV> sin(const Dual2<NV>& a) {
  Dual2<NV> r;
  const double s = std::sin(a.v), c = std::cos(a.v);
  r.v = s;
  r.g = c * a.g;
  r.h = c * a.h - s * a.g * a.g.transpose();
  return r;
}

template <int NV>
Dual2<NV> cos(const Dual2<NV>& a) {
  Dual2<NV> r;
  const double s = std::sin(a.v), c = std::cos(a.v);
  r.v = c;
  r.g = -s * a.g;
  r.h = -s * a.h - c * a.g * a.g.transpose();
  return r;
}

}  // namespace etmpc
