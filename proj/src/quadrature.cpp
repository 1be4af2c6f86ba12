#include "rskelly/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <fmt/format.h>

#include "rskelly/error.hpp"

namespace rskelly {

namespace {

// Kronrod abscissae on [0, 1] (odd indices are the Gauss points) and weights.
constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  Interval iv;
  std::vector<double> value;
  std::vector<double> error;
};

void kronrod(const VectorIntegrand& f, std::size_t dim, Interval iv, std::vector<double>& k15,
             std::vector<double>* err, std::vector<double>& buf) {
  const double center = 0.5 * (iv.a + iv.b);
  const double half = 0.5 * (iv.b - iv.a);
  std::vector<double> g7(dim, 0.0);
  k15.assign(dim, 0.0);
  buf.resize(dim);

  f(center, buf);
  for (std::size_t c = 0; c < dim; ++c) {
    k15[c] += kWgk[7] * buf[c];
    g7[c] += kWg[3] * buf[c];
  }
  for (std::size_t j = 0; j < 7; ++j) {
    const double dx = half * kXgk[j];
    for (double t : {center - dx, center + dx}) {
      f(t, buf);
      for (std::size_t c = 0; c < dim; ++c) {
        k15[c] += kWgk[j] * buf[c];
        if (j % 2 == 1) g7[c] += kWg[j / 2] * buf[c];
      }
    }
  }
  for (std::size_t c = 0; c < dim; ++c) k15[c] *= half;
  if (err != nullptr) {
    err->resize(dim);
    for (std::size_t c = 0; c < dim; ++c) (*err)[c] = std::abs(k15[c] - half * g7[c]);
  }
}

}  // namespace

QuadratureResult integrate_adaptive(const VectorIntegrand& f, std::size_t dim, double a, double b,
                                    const QuadratureConfig& config) {
  constexpr int kInitialPanels = 8;
  std::vector<double> buf;
  std::vector<Panel> panels;
  panels.reserve(config.max_intervals);
  const double width = (b - a) / kInitialPanels;
  for (int p = 0; p < kInitialPanels; ++p) {
    Panel panel;
    panel.iv = {a + p * width, p + 1 == kInitialPanels ? b : a + (p + 1) * width};
    kronrod(f, dim, panel.iv, panel.value, &panel.error, buf);
    panels.push_back(std::move(panel));
  }

  std::vector<double> total(dim), total_err(dim), tol(dim);
  auto refresh = [&] {
    std::fill(total.begin(), total.end(), 0.0);
    std::fill(total_err.begin(), total_err.end(), 0.0);
    for (const Panel& p : panels) {
      for (std::size_t c = 0; c < dim; ++c) {
        total[c] += p.value[c];
        total_err[c] += p.error[c];
      }
    }
    bool done = true;
    for (std::size_t c = 0; c < dim; ++c) {
      tol[c] = std::max(config.rel_tol * std::abs(total[c]), config.abs_tol);
      if (!(total_err[c] <= tol[c])) done = false;
    }
    return done;
  };

  while (!refresh()) {
    if (panels.size() >= config.max_intervals) {
      double worst = 0.0;
      for (std::size_t c = 0; c < dim; ++c) worst = std::max(worst, total_err[c] / tol[c]);
      throw QuadratureNotConverged(fmt::format(
          "error estimate exceeds tolerance by a factor {:.3g} after {} intervals", worst,
          panels.size()));
    }
    // Bisect the panel contributing most to the worst tolerance ratio.
    std::size_t worst_panel = 0;
    double worst_badness = -1.0;
    for (std::size_t i = 0; i < panels.size(); ++i) {
      double badness = 0.0;
      for (std::size_t c = 0; c < dim; ++c) badness = std::max(badness, panels[i].error[c] / tol[c]);
      if (badness > worst_badness) {
        worst_badness = badness;
        worst_panel = i;
      }
    }
    const Interval iv = panels[worst_panel].iv;
    const double mid = 0.5 * (iv.a + iv.b);
    if (!(mid > iv.a && mid < iv.b)) {
      throw QuadratureNotConverged("interval cannot be bisected further at machine precision");
    }
    Panel right;
    right.iv = {mid, iv.b};
    kronrod(f, dim, right.iv, right.value, &right.error, buf);
    Panel& left = panels[worst_panel];
    left.iv = {iv.a, mid};
    kronrod(f, dim, left.iv, left.value, &left.error, buf);
    panels.push_back(std::move(right));
  }

  std::sort(panels.begin(), panels.end(),
            [](const Panel& x, const Panel& y) { return x.iv.a < y.iv.a; });
  QuadratureResult result;
  result.partition.reserve(panels.size());
  for (const Panel& p : panels) result.partition.push_back(p.iv);
  // Summing left to right keeps the value identical to integrate_on_partition.
  result.value = integrate_on_partition(f, dim, result.partition);
  result.error = total_err;
  return result;
}

std::vector<double> integrate_on_partition(const VectorIntegrand& f, std::size_t dim,
                                           std::span<const Interval> partition) {
  std::vector<double> total(dim, 0.0), piece, buf;
  for (const Interval& iv : partition) {
    kronrod(f, dim, iv, piece, nullptr, buf);
    for (std::size_t c = 0; c < dim; ++c) total[c] += piece[c];
  }
  return total;
}

}  // namespace rskelly
