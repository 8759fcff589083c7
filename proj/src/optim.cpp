#include "descnet/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace descnet {

void AdamConfig::validate() const {
  if (!(learning_rate > 0)) throw std::invalid_argument("learning rate must be positive");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) {
    throw std::invalid_argument("Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0)) throw std::invalid_argument("Adam epsilon must be positive");
}

template <typename T>
void adam_step(AdamState<T>& state, const std::vector<BasicTensor<T>*>& params,
               const std::vector<const BasicTensor<T>*>& grads, const AdamConfig& cfg) {
  cfg.validate();
  if (params.size() != grads.size()) {
    throw ShapeError("Adam: " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_same_shape(params[i]->shape(), grads[i]->shape(), "Adam gradient");
  }
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.emplace_back(p->shape());
      state.v.emplace_back(p->shape());
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("Adam state does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_same_shape(state.m[i].shape(), params[i]->shape(), "Adam moment");
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    T* p = params[i]->data();
    const T* g = grads[i]->data();
    T* m = state.m[i].data();
    T* v = state.v[i].data();
    for (std::size_t j = 0; j < params[i]->size(); ++j) {
      const double gj = g[j];
      const double mj = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
      const double vj = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double update = cfg.learning_rate * (mj / c1) / (std::sqrt(vj / c2) + cfg.epsilon);
      p[j] = static_cast<T>(p[j] - update);
    }
  }
}

template void adam_step(AdamState<float>&, const std::vector<BasicTensor<float>*>&,
                        const std::vector<const BasicTensor<float>*>&, const AdamConfig&);
template void adam_step(AdamState<double>&, const std::vector<BasicTensor<double>*>&,
                        const std::vector<const BasicTensor<double>*>&, const AdamConfig&);

}  // namespace descnet
