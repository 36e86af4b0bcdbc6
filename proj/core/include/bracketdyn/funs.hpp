#pragma once

#include <cmath>
#include <stdexcept>

namespace bracketdyn {

// Elementwise scalar functions shared by the dense matrix kernel and the
// reverse-mode tape. The *Prime entries are first derivatives exposed as
// forward ops so that input-gradients of small networks can be assembled
// explicitly inside a recorded computation.
enum class UnaryFun {
  kExp,
  kLog,
  kSqrt,
  kTanh,
  kTanhPrime,
  kSigmoid,
  kRelu,
  kLeakyRelu,  // slope 0.01
  kSquareplus, // (x + sqrt(x^2 + 4)) / 2
  kSquareplusPrime,
  kRecip,
  kAbs,
};

inline const char* unary_name(UnaryFun f) {
  switch (f) {
    case UnaryFun::kExp: return "exp";
    case UnaryFun::kLog: return "log";
    case UnaryFun::kSqrt: return "sqrt";
    case UnaryFun::kTanh: return "tanh";
    case UnaryFun::kTanhPrime: return "tanh_prime";
    case UnaryFun::kSigmoid: return "sigmoid";
    case UnaryFun::kRelu: return "relu";
    case UnaryFun::kLeakyRelu: return "leaky_relu";
    case UnaryFun::kSquareplus: return "squareplus";
    case UnaryFun::kSquareplusPrime: return "squareplus_prime";
    case UnaryFun::kRecip: return "recip";
    case UnaryFun::kAbs: return "abs";
  }
  return "?";
}

constexpr double kLeakySlope = 0.01;

inline double unary_eval(UnaryFun f, double x) {
  switch (f) {
    case UnaryFun::kExp: return std::exp(x);
    case UnaryFun::kLog: return std::log(x);
    case UnaryFun::kSqrt: return std::sqrt(x);
    case UnaryFun::kTanh: return std::tanh(x);
    case UnaryFun::kTanhPrime: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case UnaryFun::kSigmoid: return 1.0 / (1.0 + std::exp(-x));
    case UnaryFun::kRelu: return x > 0 ? x : 0.0;
    case UnaryFun::kLeakyRelu: return x > 0 ? x : kLeakySlope * x;
    case UnaryFun::kSquareplus: return 0.5 * (x + std::sqrt(x * x + 4.0));
    case UnaryFun::kSquareplusPrime:
      return 0.5 * (1.0 + x / std::sqrt(x * x + 4.0));
    case UnaryFun::kRecip: return 1.0 / x;
    case UnaryFun::kAbs: return std::fabs(x);
  }
  throw std::logic_error("unary_eval: bad fun");
}

// Derivative of unary_eval at x, given y = unary_eval(f, x).
inline double unary_deriv(UnaryFun f, double x, double y) {
  switch (f) {
    case UnaryFun::kExp: return y;
    case UnaryFun::kLog: return 1.0 / x;
    case UnaryFun::kSqrt: return 0.5 / y;
    case UnaryFun::kTanh: return 1.0 - y * y;
    case UnaryFun::kTanhPrime: {
      const double t = std::tanh(x);
      return -2.0 * t * (1.0 - t * t);
    }
    case UnaryFun::kSigmoid: return y * (1.0 - y);
    case UnaryFun::kRelu: return x > 0 ? 1.0 : 0.0;
    case UnaryFun::kLeakyRelu: return x > 0 ? 1.0 : kLeakySlope;
    case UnaryFun::kSquareplus:
      return 0.5 * (1.0 + x / std::sqrt(x * x + 4.0));
    case UnaryFun::kSquareplusPrime: {
      const double s = x * x + 4.0;
      return 2.0 / (s * std::sqrt(s));
    }
    case UnaryFun::kRecip: return -y * y;
    case UnaryFun::kAbs: return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0);
  }
  throw std::logic_error("unary_deriv: bad fun");
}

} // namespace bracketdyn
