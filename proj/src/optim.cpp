#include "qgrace/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace qgrace::optim {

void Adam::step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads) {
  if (params.size() != grads.size()) throw std::invalid_argument("Adam: params/grads mismatch");
  if (m_.empty()) {
    for (const auto* p : params) {
      m_.emplace_back(p->rows(), p->cols());
      v_.emplace_back(p->rows(), p->cols());
    }
  }
  if (m_.size() != params.size()) throw std::invalid_argument("Adam: block count changed");
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto p = params[b]->flat();
    auto g = grads[b]->flat();
    auto m = m_[b].flat();
    auto v = v_[b].flat();
    if (p.size() != g.size() || p.size() != m.size()) {
      throw std::invalid_argument("Adam: block shape changed");
    }
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = config_.beta1 * m[k] + (1.0 - config_.beta1) * g[k];
      v[k] = config_.beta2 * v[k] + (1.0 - config_.beta2) * g[k] * g[k];
      p[k] -= config_.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + config_.eps);
    }
  }
}

}  // namespace qgrace::optim
