// Copyright 2026 The PSM Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "special.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace psm::density::detail {
namespace {

constexpr double kInfD = std::numeric_limits<double>::infinity();
constexpr double kTwoPi = 6.283185307179586476925286766559;

// Gauss-Legendre abscissae (negative half) and weights for 6, 12 and 20 points.
constexpr double kGLx[3][10] = {
    {-0.9324695142031522, -0.6612093864662647, -0.2386191860831970},
    {-0.9815606342467191, -0.9041172563704750, -0.7699026741943050, -0.5873179542866171, -0.3678314989981802,
     -0.1252334085114692},
    {-0.9931285991850949, -0.9639719272779138, -0.9122344282513259, -0.8391169718222188, -0.7463319064601508,
     -0.6360536807265150, -0.5108670019508271, -0.3737060887154196, -0.2277858511416451, -0.07652652113349733}};
constexpr double kGLw[3][10] = {
    {0.1713244923791705, 0.3607615730481384, 0.4679139345726904},
    {0.04717533638651177, 0.1069393259953183, 0.1600783285433464, 0.2031674267230659, 0.2334925365383547,
     0.2491470458134029},
    {0.01761400713915212, 0.04060142980038694, 0.06267204833410906, 0.08327674157670475, 0.1019301198172404,
     0.1181945319615184, 0.1316886384491766, 0.1420961093183821, 0.1491729864726037, 0.1527533871307259}};

}  // namespace

double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
double norm_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }
double norm_logpdf(double z) { return -0.5 * (kLog2Pi + z * z); }

double norm_mass(double a, double b) {
  if (!(a < b)) return 0.0;
  if (a > 0) return std::max(0.0, norm_sf(a) - norm_sf(b));
  return std::max(0.0, norm_cdf(b) - norm_cdf(a));
}

double norm_quantile(double p) {
  if (p <= 0) return -kInfD;
  if (p >= 1) return kInfD;
  // Acklam's rational approximation followed by one Halley step.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                             1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                             6.680131188771972e+01, -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                             -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                             3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= 1 - plow) {
    double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    double q = std::sqrt(-2 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  double e = (p < 0.5 ? norm_cdf(x) - p : (1 - p) - norm_sf(x));
  if (p >= 0.5) e = -e;
  double u = e * std::sqrt(kTwoPi) * std::exp(x * x / 2);
  return x - u / (1 + x * u / 2);
}

// Genz's algorithm for the bivariate normal upper orthant.
double bvn_upper(double h, double k, double r) {
  if (h == -kInfD) return k == -kInfD ? 1.0 : (k == kInfD ? 0.0 : norm_sf(k));
  if (k == -kInfD) return h == kInfD ? 0.0 : norm_sf(h);
  if (h == kInfD || k == kInfD) return 0.0;
  int ng, lg;
  double ar = std::abs(r);
  if (ar < 0.3) {
    ng = 0, lg = 3;
  } else if (ar < 0.75) {
    ng = 1, lg = 6;
  } else {
    ng = 2, lg = 10;
  }
  double hk = h * k;
  double bvn = 0;
  if (ar < 0.925) {
    double hs = (h * h + k * k) / 2;
    double asr = std::asin(r);
    for (int i = 0; i < lg; ++i) {
      double sn = std::sin(asr * (1 + kGLx[ng][i]) / 2);
      bvn += kGLw[ng][i] * std::exp((sn * hk - hs) / (1 - sn * sn));
      sn = std::sin(asr * (1 - kGLx[ng][i]) / 2);
      bvn += kGLw[ng][i] * std::exp((sn * hk - hs) / (1 - sn * sn));
    }
    return bvn * asr / (2 * kTwoPi) + norm_sf(h) * norm_sf(k);
  }
  if (r < 0) {
    k = -k;
    hk = -hk;
  }
  if (ar < 1) {
    double as = (1 - r) * (1 + r);
    double a = std::sqrt(as);
    double bs = (h - k) * (h - k);
    double c = (4 - hk) / 8;
    double d = (12 - hk) / 16;
    bvn = a * std::exp(-(bs / as + hk) / 2) * (1 - c * (bs - as) * (1 - d * bs / 5) / 3 + c * d * as * as / 5);
    if (hk > -100) {
      double b = std::sqrt(bs);
      bvn -= std::exp(-hk / 2) * std::sqrt(kTwoPi) * norm_cdf(-b / a) * b * (1 - c * bs * (1 - d * bs / 5) / 3);
    }
    a /= 2;
    for (int i = 0; i < lg; ++i) {
      for (int s : {-1, 1}) {
        double xs = a * (s * kGLx[ng][i] + 1);
        xs *= xs;
        double rs = std::sqrt(1 - xs);
        double asr = -(bs / xs + hk) / 2;
        if (asr > -100) {
          bvn += a * kGLw[ng][i] * std::exp(asr) *
                 (std::exp(-hk * (1 - rs) / (2 * (1 + rs))) / rs - (1 + c * xs * (1 + d * xs)));
        }
      }
    }
    bvn = -bvn / kTwoPi;
  }
  if (r > 0) return std::clamp(bvn + norm_sf(std::max(h, k)), 0.0, 1.0);
  bvn = -bvn;
  if (k > h) {
    // here k holds the negated original bound
    bvn += norm_mass(h, k);
  }
  return std::clamp(bvn, 0.0, 1.0);
}

double bvn_mass(double a1, double b1, double a2, double b2, double r) {
  if (!(a1 < b1) || !(a2 < b2)) return 0.0;
  double p = bvn_upper(a1, a2, r) - bvn_upper(b1, a2, r) - bvn_upper(a1, b2, r) + bvn_upper(b1, b2, r);
  return std::clamp(p, 0.0, 1.0);
}

double truncated_normal(double a, double b, Rng& rng) {
  if (a > 0) return -truncated_normal(-b, -a, rng);
  // (a, b) now reaches into the lower half, where the cdf is accurate.
  double pa = norm_cdf(a), pb = norm_cdf(b);
  if (pb - pa > 1e-300 && pb > pa) {
    double u = pa + (pb - pa) * rng.uniform();
    double x = norm_quantile(u);
    if (std::isfinite(x)) return std::clamp(x, a, b);
  }
  // numerically empty: fall back to the nearer bound
  return std::isfinite(b) ? (std::isfinite(a) ? (a + b) / 2 : b) : a;
}

double truncated_normal_mean(double a, double b) {
  if (a > 0) return -truncated_normal_mean(-b, -a);
  double z = norm_mass(a, b);
  double pa = std::isfinite(a) ? std::exp(norm_logpdf(a)) : 0.0;
  double pb = std::isfinite(b) ? std::exp(norm_logpdf(b)) : 0.0;
  if (z <= 1e-300) return std::isfinite(b) ? b : a;
  return std::clamp((pa - pb) / z, a, b);
}

double log_sum_exp(const double* v, int n) {
  double m = -kInfD;
  for (int i = 0; i < n; ++i) m = std::max(m, v[i]);
  if (m == -kInfD) return m;
  long double s = 0;
  for (int i = 0; i < n; ++i) s += std::exp(static_cast<long double>(v[i] - m));
  return m + static_cast<double>(std::log(s));
}

}  // namespace psm::density::detail
