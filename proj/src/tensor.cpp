#include "dirlatent/tensor.hpp"

#include <numeric>
#include <sstream>

namespace dirlatent {

int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t e : s) n *= e;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)) {
    if (shape_numel(shape_) != static_cast<int64_t>(data.size())) {
        throw ContractError("tensor: data size " + std::to_string(data.size()) +
                            " does not match shape " + shape_str(shape_));
    }
    data_ = std::make_shared<const std::vector<double>>(std::move(data));
}

Tensor Tensor::zeros(Shape shape) {
    auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(static_cast<size_t>(n), 0.0));
}

Tensor Tensor::full(Shape shape, double v) {
    auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(static_cast<size_t>(n), v));
}

Tensor Tensor::scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

Tensor Tensor::view(std::shared_ptr<const std::vector<double>> storage, Shape shape) {
    if (!storage || shape_numel(shape) != static_cast<int64_t>(storage->size())) {
        throw ContractError("view: storage does not match shape " + shape_str(shape));
    }
    Tensor t;
    t.data_ = std::move(storage);
    t.shape_ = std::move(shape);
    return t;
}

double Tensor::scalar_value() const {
    if (size() != 1) throw ContractError("scalar_value: tensor has " + std::to_string(size()) + " elements");
    return (*data_)[0];
}

Tensor Tape::leaf(Shape shape, std::vector<double> data) {
    Tensor t(std::move(shape), std::move(data));
    t.tape_ = this;
    t.node_ = num_nodes();
    nodes_.push_back(Node{"leaf", {}, nullptr, t.size()});
    grads_.emplace_back(static_cast<size_t>(t.size()), 0.0);
    return t;
}

Tensor Tape::leaf(const Tensor& value) {
    Tensor t = value;
    t.tape_ = this;
    t.node_ = num_nodes();
    nodes_.push_back(Node{"leaf", {}, nullptr, t.size()});
    grads_.emplace_back(static_cast<size_t>(t.size()), 0.0);
    return t;
}

Tensor Tape::emit(Shape shape, std::vector<double> data, std::vector<int> inputs,
                  BackwardFn backward, const char* op_kind) {
    return emit(Tensor(std::move(shape), std::move(data)), std::move(inputs),
                std::move(backward), op_kind);
}

Tensor Tape::emit(Tensor value, std::vector<int> inputs, BackwardFn backward,
                  const char* op_kind) {
    const int id = num_nodes();
    for (int in : inputs) {
        if (in >= id) throw ContractError("tape: node inputs must precede the node");
    }
    value.tape_ = this;
    value.node_ = id;
    nodes_.push_back(Node{op_kind, std::move(inputs), std::move(backward), value.size()});
    grads_.emplace_back(static_cast<size_t>(value.size()), 0.0);
    return value;
}

std::span<const double> Tape::grad(int node) const {
    const auto& g = (active_ ? *active_ : grads_)[static_cast<size_t>(node)];
    return {g.data(), g.size()};
}

std::span<double> Tape::grad_mut(int node) {
    auto& g = (active_ ? *active_ : grads_)[static_cast<size_t>(node)];
    return {g.data(), g.size()};
}

std::span<const double> Tape::grad_of(const Tensor& t) const {
    if (t.tape() != this) throw ContractError("grad_of: tensor does not live on this tape");
    return grad(t.node());
}

void Tape::zero_grad() {
    for (auto& g : grads_) std::fill(g.begin(), g.end(), 0.0);
}

void Tape::backward(const Tensor& loss) {
    if (loss.tape() != this) throw ContractError("backward: loss does not live on this tape");
    if (loss.size() != 1) throw ContractError("backward: loss must be a scalar, got " + shape_str(loss.shape()));
    // Sweep into scratch buffers so each call contributes exactly its own
    // gradient, then fold into the persistent accumulators.
    std::vector<std::vector<double>> work(grads_.size());
    for (size_t i = 0; i < work.size(); ++i) work[i].assign(grads_[i].size(), 0.0);
    active_ = &work;
    work[static_cast<size_t>(loss.node())][0] = 1.0;
    for (int id = loss.node(); id >= 0; --id) {
        const Node& n = nodes_[static_cast<size_t>(id)];
        if (n.backward) n.backward(*this, id);
    }
    active_ = nullptr;
    for (size_t i = 0; i < work.size(); ++i) {
        for (size_t j = 0; j < work[i].size(); ++j) grads_[i][j] += work[i][j];
    }
}

}  // namespace dirlatent
