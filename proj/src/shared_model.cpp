#include "asgd/shared_model.hpp"

#include <cmath>
#include <stdexcept>

namespace asgd {

SharedModel::SharedModel(std::span<const double> initial, int epoch_tag)
    : cells_(initial.size()), epoch_tag_(epoch_tag) {
  if (initial.empty()) throw std::invalid_argument("model dimension must be >= 1");
  for (std::size_t j = 0; j < initial.size(); ++j) cells_[j].store(initial[j]);
}

SharedModel::SharedModel(int dim, double fill, int epoch_tag)
    : cells_(dim > 0 ? dim : 0), epoch_tag_(epoch_tag) {
  if (dim < 1) throw std::invalid_argument("model dimension must be >= 1");
  for (auto& cell : cells_) cell.store(fill);
}

double SharedModel::add(int j, double delta) {
  if (j < 0 || j >= dim()) throw std::out_of_range("cell index");
  if (!std::isfinite(delta)) throw std::invalid_argument("non-finite delta");
  return cells_[j].fetch_add(delta);
}

std::vector<double> SharedModel::read_view() const {
  std::vector<double> view(cells_.size());
  read_view_into(view);
  return view;
}

void SharedModel::read_view_into(std::span<double> out) const {
  for (std::size_t j = 0; j < cells_.size(); ++j) out[j] = cells_[j].load();
}

}  // namespace asgd
