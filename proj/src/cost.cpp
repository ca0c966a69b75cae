#include "egw/cost.hpp"

#include <cmath>
#include <sstream>

namespace egw {

namespace {

double parse_number(const std::string& text, const std::string& what) {
  size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw InputError("cannot parse " + what + " from '" + text + "'");
  }
  if (used != text.size()) throw InputError("cannot parse " + what + " from '" + text + "'");
  return v;
}

}  // namespace

CostSpec CostSpec::parse(const std::string& text) {
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? std::string() : text.substr(colon + 1);
  CostSpec spec;
  if (head == "sq_euclidean") {
    spec.kind = CostKind::SqEuclidean;
  } else if (head == "euclidean") {
    spec = euclidean();
  } else if (head == "p_norm") {
    spec = p_norm(parse_number(arg, "exponent"));
  } else if (head == "exp") {
    spec = exp_kernel(parse_number(arg, "sigma"));
  } else if (head == "embedding" || head == "matrix") {
    if (arg.empty()) throw InputError("cost '" + head + "' needs a file path");
    spec.kind = head == "embedding" ? CostKind::Embedding : CostKind::DenseMatrix;
    spec.path = arg;
  } else {
    throw InputError("unknown cost '" + text + "'");
  }
  if (colon != std::string::npos && (head == "sq_euclidean" || head == "euclidean")) {
    throw InputError("cost '" + head + "' takes no argument");
  }
  spec.validate();
  return spec;
}

void CostSpec::validate() const {
  if (kind == CostKind::PNorm && !(p > 0.0 && p <= 2.0)) {
    throw InputError("p_norm exponent must lie in (0, 2]");
  }
  if (kind == CostKind::ExpKernel && !(sigma > 0.0 && std::isfinite(sigma))) {
    throw InputError("exp kernel radius must be positive");
  }
}

std::string CostSpec::to_string() const {
  std::ostringstream os;
  switch (kind) {
    case CostKind::SqEuclidean: os << "sq_euclidean"; break;
    case CostKind::Euclidean: os << "euclidean"; break;
    case CostKind::PNorm: os << "p_norm:" << p; break;
    case CostKind::ExpKernel: os << "exp:" << sigma; break;
    case CostKind::Embedding: os << "embedding:" << path; break;
    case CostKind::DenseMatrix: os << "matrix:" << path; break;
  }
  return os.str();
}

double CostSpec::exponent() const {
  switch (kind) {
    case CostKind::Euclidean: return 1.0;
    case CostKind::PNorm: return p;
    default: return 2.0;
  }
}

bool CostSpec::differentiable() const {
  switch (kind) {
    case CostKind::SqEuclidean:
    case CostKind::Embedding:
    case CostKind::ExpKernel:
      return true;
    case CostKind::PNorm:
      return p > 1.0;
    default:
      return false;
  }
}

double cost_of_distance(const CostSpec& spec, double r) {
  switch (spec.kind) {
    case CostKind::SqEuclidean:
    case CostKind::Embedding:
      return r * r;
    case CostKind::Euclidean:
      return r;
    case CostKind::PNorm:
      return r == 0.0 ? 0.0 : std::pow(r, spec.p);
    case CostKind::ExpKernel:
      return 1.0 - std::exp(-r * r / (2.0 * spec.sigma * spec.sigma));
    case CostKind::DenseMatrix:
      break;
  }
  throw InputError("a dense cost matrix cannot be evaluated from coordinates");
}

Matrix cost_matrix(const Matrix& x, const Matrix& y, const CostSpec& spec) {
  if (x.cols() != y.cols()) throw InputError("cost_matrix: dimension mismatch");
  if (spec.kind == CostKind::DenseMatrix) {
    throw InputError("a dense cost matrix cannot be evaluated from coordinates");
  }
  Matrix c(x.rows(), y.rows());
  const Index dim = x.cols();
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < y.rows(); ++j) {
      double s = 0.0;
      for (Index k = 0; k < dim; ++k) {
        const double d = x(i, k) - y(j, k);
        s += d * d;
      }
      c(i, j) = spec.is_squared_distance() ? s : cost_of_distance(spec, std::sqrt(s));
    }
  }
  return c;
}

Matrix cost_matrix(const Matrix& x, const CostSpec& spec) { return cost_matrix(x, x, spec); }

void cost_gradient(const CostSpec& spec, const double* x, const double* y, Index dim,
                   double* out) {
  double r2 = 0.0;
  for (Index k = 0; k < dim; ++k) r2 += (x[k] - y[k]) * (x[k] - y[k]);
  // c = phi(r^2): grad = 2 phi'(r^2) (x - y)
  double scale = 0.0;
  switch (spec.kind) {
    case CostKind::SqEuclidean:
    case CostKind::Embedding:
      scale = 2.0;
      break;
    case CostKind::ExpKernel: {
      const double s2 = spec.sigma * spec.sigma;
      scale = std::exp(-r2 / (2.0 * s2)) / s2;
      break;
    }
    case CostKind::PNorm:
      if (spec.p <= 1.0) throw InputError("p_norm cost with p <= 1 is not differentiable");
      scale = r2 == 0.0 ? 0.0 : spec.p * std::pow(r2, 0.5 * spec.p - 1.0);
      break;
    default:
      throw InputError("cost '" + spec.to_string() + "' has no position gradient");
  }
  for (Index k = 0; k < dim; ++k) out[k] = scale * (x[k] - y[k]);
}

void validate_cost_matrix(const Matrix& c) {
  if (c.rows() != c.cols()) throw InputError("cost matrix must be square");
  if (!c.allFinite()) throw InputError("cost matrix has non-finite entries");
  for (Index i = 0; i < c.rows(); ++i) {
    if (std::abs(c(i, i)) > 1e-9) {
      throw InputError("cost matrix has a nonzero diagonal entry at " + std::to_string(i));
    }
    for (Index j = i + 1; j < c.cols(); ++j) {
      if (std::abs(c(i, j) - c(j, i)) > 1e-9) {
        std::ostringstream os;
        os << "cost matrix is not symmetric at (" << i << ", " << j << ")";
        throw InputError(os.str());
      }
    }
  }
}

}  // namespace egw
