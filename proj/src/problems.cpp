#include "asgd/problems.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace asgd {

namespace {

void check_view(const ProblemSpec& spec, std::span<const double> view) {
  if (static_cast<int>(view.size()) != spec.dim)
    throw std::invalid_argument("view length does not match problem dimension");
  for (double v : view)
    if (!std::isfinite(v))
      throw std::invalid_argument("non-finite view entry");
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

double ProblemSpec::grad_bound() const { return std::sqrt(second_moment); }

Dataset load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  Dataset data;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw std::runtime_error("malformed CSV cell '" + cell + "' in " + path);
      }
    }
    if (row.size() < 2)
      throw std::runtime_error("CSV row needs at least one feature and a label");
    data.labels.push_back(row.back());
    row.pop_back();
    data.points.push_back(std::move(row));
  }
  for (const auto& p : data.points)
    if (p.size() != data.feature_dim())
      throw std::runtime_error("inconsistent feature dimension in " + path);
  return data;
}

ProblemSpec quadratic_problem(int dim, double sigma, double box_radius) {
  if (dim < 1) throw std::invalid_argument("dimension must be positive");
  if (sigma < 0) throw std::invalid_argument("sigma must be nonnegative");
  if (box_radius <= 0) throw std::invalid_argument("box radius must be positive");
  ProblemSpec spec;
  spec.kind = ProblemSpec::Kind::Quadratic;
  spec.dim = dim;
  spec.strong_convexity = 1.0;
  spec.lipschitz = 1.0;
  spec.noise_sigma = sigma;
  spec.box_radius = box_radius;
  spec.minimizer.assign(dim, 0.0);
  const double reach = box_radius + 3.0 * sigma * std::sqrt(double(dim));
  spec.second_moment = reach * reach;
  return spec;
}

ProblemSpec regression_problem(const Dataset& data, double ridge) {
  const std::size_t m = data.size();
  if (m == 0) throw std::invalid_argument("empty dataset");
  if (ridge < 0) throw std::invalid_argument("ridge must be nonnegative");
  const int d = static_cast<int>(data.feature_dim());
  if (d == 0) throw std::invalid_argument("dataset has zero feature dimension");

  Eigen::MatrixXd second_moment = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d);
  double max_row_sq = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    Eigen::Map<const Eigen::VectorXd> a(data.points[i].data(), d);
    second_moment.noalias() += a * a.transpose();
    rhs.noalias() += data.labels[i] * a;
    max_row_sq = std::max(max_row_sq, a.squaredNorm());
  }
  second_moment /= double(m);
  rhs /= double(m);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(second_moment);
  const double lambda_min = eig.eigenvalues().minCoeff();
  constexpr double kSingularTol = 1e-12;
  if (lambda_min + ridge <= kSingularTol)
    throw std::runtime_error("unidentifiable minimizer");

  Eigen::MatrixXd normal = second_moment;
  normal.diagonal().array() += ridge;
  const Eigen::VectorXd xstar = normal.ldlt().solve(rhs);

  ProblemSpec spec;
  spec.kind = ProblemSpec::Kind::Regression;
  spec.dim = d;
  spec.data = data;
  spec.ridge = ridge;
  spec.strong_convexity = lambda_min + ridge;
  // Per-sample operator norm, not lambda_max of the averaged matrix: the
  // expected-Lipschitz assumption is an average of per-sample norms and the
  // averaged matrix can understate it.
  spec.lipschitz = max_row_sq + ridge;
  spec.minimizer.assign(xstar.data(), xstar.data() + d);

  const double xstar_norm = xstar.norm();
  double m2 = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    Eigen::Map<const Eigen::VectorXd> a(data.points[i].data(), d);
    const double residual_at_star = std::abs(a.dot(xstar) - data.labels[i]);
    const double reach = a.norm() * (residual_at_star + a.norm() * spec.box_radius) +
                         ridge * (xstar_norm + spec.box_radius);
    m2 += reach * reach;
  }
  spec.second_moment = m2 / double(m);
  return spec;
}

GradientSample sample_gradient(const ProblemSpec& spec,
                               std::span<const double> view, Rng& rng) {
  check_view(spec, view);
  GradientSample sample;
  sample.source_view.assign(view.begin(), view.end());
  sample.value.resize(spec.dim);
  const std::uint64_t before = rng.words_consumed();
  if (spec.kind == ProblemSpec::Kind::Quadratic) {
    sample.draw.noise.resize(spec.dim);
    for (int j = 0; j < spec.dim; ++j) {
      sample.draw.noise[j] = rng.normal(spec.noise_sigma);
      sample.value[j] = view[j] - sample.draw.noise[j];
    }
  } else {
    const std::size_t i = rng.uniform_index(spec.data.size());
    sample.draw.dataset_index = static_cast<int>(i);
    sample.value = gradient_for_index(spec, view, i);
  }
  sample.draw.words = rng.words_consumed() - before;
  return sample;
}

void sample_gradient_into(const ProblemSpec& spec, std::span<const double> view,
                          Rng& rng, std::span<double> out) {
  check_view(spec, view);
  if (spec.kind == ProblemSpec::Kind::Quadratic) {
    for (int j = 0; j < spec.dim; ++j)
      out[j] = view[j] - rng.normal(spec.noise_sigma);
    return;
  }
  const std::size_t i = rng.uniform_index(spec.data.size());
  const auto& a = spec.data.points[i];
  const double residual = dot(a, view) - spec.data.labels[i];
  for (int j = 0; j < spec.dim; ++j)
    out[j] = a[j] * residual + spec.ridge * view[j];
}

std::vector<double> mean_gradient(const ProblemSpec& spec,
                                  std::span<const double> view) {
  check_view(spec, view);
  std::vector<double> g(spec.dim, 0.0);
  if (spec.kind == ProblemSpec::Kind::Quadratic) {
    g.assign(view.begin(), view.end());
    return g;
  }
  for (std::size_t i = 0; i < spec.data.size(); ++i) {
    const auto gi = gradient_for_index(spec, view, i);
    for (int j = 0; j < spec.dim; ++j) g[j] += gi[j];
  }
  for (int j = 0; j < spec.dim; ++j) g[j] /= double(spec.data.size());
  return g;
}

std::vector<double> gradient_for_index(const ProblemSpec& spec,
                                       std::span<const double> view,
                                       std::size_t index) {
  if (spec.kind != ProblemSpec::Kind::Regression)
    throw std::invalid_argument("per-index gradients require a dataset problem");
  if (index >= spec.data.size()) throw std::out_of_range("dataset index");
  const auto& a = spec.data.points[index];
  const double residual = dot(a, view) - spec.data.labels[index];
  std::vector<double> g(spec.dim);
  for (int j = 0; j < spec.dim; ++j)
    g[j] = a[j] * residual + spec.ridge * view[j];
  return g;
}

}  // namespace asgd
