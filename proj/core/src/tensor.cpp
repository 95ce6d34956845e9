#include "e4g/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace e4g {

size_t shape_numel(const Shape& shape) {
  size_t n = 1;
  for (size_t e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <typename Real>
Tensor<Real> Tensor<Real>::zeros(Shape shape) {
  return full(std::move(shape), Real(0));
}

template <typename Real>
Tensor<Real> Tensor<Real>::full(Shape shape, Real value) {
  if (shape.size() > 3) throw ShapeError("tensor rank > 3: " + shape_str(shape));
  Tensor t;
  t.st_ = std::make_shared<Storage>();
  t.st_->shape = std::move(shape);
  t.st_->value.assign(shape_numel(t.st_->shape), value);
  return t;
}

template <typename Real>
Tensor<Real> Tensor<Real>::from(Shape shape, std::vector<Real> values) {
  if (shape.size() > 3) throw ShapeError("tensor rank > 3: " + shape_str(shape));
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("data length " + std::to_string(values.size()) +
                     " does not match shape " + shape_str(shape));
  }
  Tensor t;
  t.st_ = std::make_shared<Storage>();
  t.st_->shape = std::move(shape);
  t.st_->value = std::move(values);
  return t;
}

template <typename Real>
Real Tensor<Real>::item() const {
  if (numel() != 1) {
    throw ShapeError("item() requires a single-element tensor, got " + shape_str(shape()));
  }
  return st_->value[0];
}

template <typename Real>
void Tensor<Real>::ensure_grad() const {
  if (st_->grad.empty()) st_->grad.assign(st_->value.size(), Real(0));
}

template <typename Real>
void Tensor<Real>::zero_grad() const {
  std::fill(st_->grad.begin(), st_->grad.end(), Real(0));
}

template <typename Real>
Tensor<Real> Tensor<Real>::clone() const {
  Tensor t;
  t.st_ = std::make_shared<Storage>();
  t.st_->shape = st_->shape;
  t.st_->value = st_->value;
  return t;
}

template <typename Real>
void Tape<Real>::record(Tensor<Real> output, std::vector<Tensor<Real>> inputs,
                        std::function<void()> pull) {
  if (!recording_) return;
  bool any = false;
  for (const auto& in : inputs) {
    if (in.requires_grad()) {
      any = true;
      break;
    }
  }
  if (!any) return;
  output.set_requires_grad(true);
  nodes_.push_back({std::move(output), std::move(inputs), std::move(pull)});
}

template <typename Real>
void Tape<Real>::backward(const Tensor<Real>& root) {
  if (!root.defined() || root.numel() != 1) {
    throw ShapeError("backward() root must be a scalar tensor");
  }
  Tensor<Real> r = root;
  r.ensure_grad();
  r.grad()[0] += Real(1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->output.has_grad()) it->pull();
  }
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace e4g
