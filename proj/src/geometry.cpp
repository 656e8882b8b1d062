#include "sktlab/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace sktlab {

SymMat congruence(const Mat2& j, const SymMat& s) {
  // (J S)_{ik} then (J S J^T)_{il} = sum_k (J S)_{ik} J_{lk}.
  const double m00 = j.a00 * s.xx + j.a01 * s.xy;
  const double m01 = j.a00 * s.xy + j.a01 * s.yy;
  const double m10 = j.a10 * s.xx + j.a11 * s.xy;
  const double m11 = j.a10 * s.xy + j.a11 * s.yy;
  return {m00 * j.a00 + m01 * j.a01, m00 * j.a10 + m01 * j.a11, m10 * j.a10 + m11 * j.a11};
}

LipschitzGraph::LipschitzGraph(double lo, double hi, std::vector<double> samples, double declared_lip,
                               double locality_radius)
    : lo_(lo), hi_(hi), samples_(std::move(samples)), declared_lip_(declared_lip), radius_(locality_radius) {
  if (!(std::isfinite(lo) && std::isfinite(hi) && hi > lo)) throw std::invalid_argument("graph: bad extent");
  if (samples_.size() < 2) throw std::invalid_argument("graph: need at least two samples");
  if (!(declared_lip >= 0.0 && std::isfinite(declared_lip))) throw std::invalid_argument("graph: bad declared Lip");
  if (!(locality_radius > 0.0)) throw std::invalid_argument("graph: locality radius must be positive");
  const double h = (hi - lo) / static_cast<double>(samples_.size() - 1);
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (!std::isfinite(samples_[i])) throw std::invalid_argument("graph: non-finite sample");
    if (i > 0) measured_lip_ = std::max(measured_lip_, std::abs(samples_[i] - samples_[i - 1]) / h);
  }
  if (measured_lip_ > declared_lip * (1.0 + 1e-12) + 1e-15)
    throw std::invalid_argument("graph: measured Lip(gamma) exceeds the declared bound");
}

LipschitzGraph LipschitzGraph::from_function(double lo, double hi, std::size_t segments,
                                             const std::function<double(double)>& gamma, double declared_lip,
                                             double locality_radius) {
  if (segments == 0) throw std::invalid_argument("graph: need at least one segment");
  std::vector<double> s(segments + 1);
  for (std::size_t i = 0; i <= segments; ++i)
    s[i] = gamma(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(segments));
  return LipschitzGraph(lo, hi, std::move(s), declared_lip, locality_radius);
}

std::size_t LipschitzGraph::segment(double x) const {
  if (!(x >= lo_ && x <= hi_)) throw std::out_of_range("graph: x' outside graph extent");
  const std::size_t segs = samples_.size() - 1;
  const double pos = (x - lo_) / (hi_ - lo_) * static_cast<double>(segs);
  return std::min(static_cast<std::size_t>(pos), segs - 1);
}

double LipschitzGraph::value(double x) const {
  const std::size_t i = segment(x);
  const std::size_t segs = samples_.size() - 1;
  const double h = (hi_ - lo_) / static_cast<double>(segs);
  const double x0 = lo_ + h * static_cast<double>(i);
  const double s = (x - x0) / h;
  return samples_[i] + s * (samples_[i + 1] - samples_[i]);
}

double LipschitzGraph::slope(double x) const {
  const std::size_t i = segment(x);
  const double h = (hi_ - lo_) / static_cast<double>(samples_.size() - 1);
  return (samples_[i + 1] - samples_[i]) / h;
}

Point flatten(const LipschitzGraph& graph, Point x) { return {x[0], x[1] - graph.value(x[0])}; }

Point unflatten(const LipschitzGraph& graph, Point y) { return {y[0], y[1] + graph.value(y[0])}; }

Mat2 flatten_jacobian(const LipschitzGraph& graph, Point x) { return {1.0, 0.0, -graph.slope(x[0]), 1.0}; }

Mat2 unflatten_jacobian(const LipschitzGraph& graph, Point y) { return {1.0, 0.0, graph.slope(y[0]), 1.0}; }

TensorField pushforward_coefficient(const TensorField& a, const LipschitzGraph& graph) {
  if (graph.measured_lip() > 1.0) throw std::invalid_argument("pushforward: Lip(gamma) > 1");
  const Grid& g = a.grid();
  if (g.dim() != 2) throw std::invalid_argument("pushforward: tensor must be two-dimensional");
  std::vector<std::vector<SymMat>> slices;
  for (std::size_t k = 0; k < a.slices(); ++k) {
    std::vector<SymMat> out(g.size());
    for (std::size_t c = 0; c < g.size(); ++c) {
      const Point y = g.center(c);
      const Point x = unflatten(graph, y);
      out[c] = congruence(flatten_jacobian(graph, x), a.at(k, g.locate(x)));
    }
    slices.push_back(std::move(out));
  }
  return TensorField(g, (g.dim() + 1) * a.ellipticity(), std::move(slices), a.axis());
}

}  // namespace sktlab
