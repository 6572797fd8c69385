#pragma once

#include <Eigen/Dense>
#include <complex>

namespace phnturbo {

using Vec  = Eigen::VectorXd;
using Mat  = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

}  // namespace phnturbo
