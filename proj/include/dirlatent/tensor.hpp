#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dirlatent/errors.hpp"

namespace dirlatent {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

class Tape;

// Dense row-major f64 tensor. Storage is immutable after construction; a
// tensor participating in differentiation carries a (tape, node) handle.
// Copies are shallow and cheap.
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> data);

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double v);
    static Tensor scalar(double v);
    // Storage-sharing constructor (reshape, deserialization). The new tensor
    // is plain (off-tape) even if the storage came from a tape tensor.
    static Tensor view(std::shared_ptr<const std::vector<double>> storage, Shape shape);

    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int64_t dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int64_t size() const { return data_ ? static_cast<int64_t>(data_->size()) : 0; }

    std::span<const double> data() const { return {data_->data(), data_->size()}; }
    double at(int64_t flat) const { return (*data_)[static_cast<size_t>(flat)]; }
    // Requires size() == 1.
    double scalar_value() const;

    bool defined() const { return static_cast<bool>(data_); }
    bool on_tape() const { return tape_ != nullptr; }
    bool requires_grad() const { return on_tape(); }
    Tape* tape() const { return tape_; }
    int node() const { return node_; }

    std::shared_ptr<const std::vector<double>> storage() const { return data_; }

private:
    friend class Tape;
    std::shared_ptr<const std::vector<double>> data_;
    Shape shape_;
    Tape* tape_ = nullptr;
    int node_ = -1;
};

// Reverse-mode gradient tape. Nodes are appended in evaluation order, so the
// list is topologically sorted by construction: every node's inputs precede
// it. Gradient storage is keyed by node id and accumulates across backward
// calls until zero_grad(). A tape is single-owner; run independent work on
// independent tapes.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, int node)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Differentiable leaf (parameter or input under test).
    Tensor leaf(Shape shape, std::vector<double> data);
    Tensor leaf(const Tensor& value);

    // Op result. `inputs` are node ids of this tape (-1 for constants).
    // `backward` reads grad(node) and accumulates into the input grads.
    Tensor emit(Shape shape, std::vector<double> data, std::vector<int> inputs,
                BackwardFn backward, const char* op_kind);
    // Same, adopting an already-built value without copying its storage.
    Tensor emit(Tensor value, std::vector<int> inputs, BackwardFn backward,
                const char* op_kind);

    int num_nodes() const { return static_cast<int>(nodes_.size()); }

    std::span<const double> grad(int node) const;
    std::span<double> grad_mut(int node);
    std::span<const double> grad_of(const Tensor& t) const;
    void zero_grad();

    // Reverse sweep seeded with d(loss)/d(loss) = 1. Loss must be a scalar
    // living on this tape.
    void backward(const Tensor& loss);

private:
    struct Node {
        const char* kind;
        std::vector<int> inputs;
        BackwardFn backward;
        int64_t numel;
    };
    std::vector<Node> nodes_;
    std::vector<std::vector<double>> grads_;
    // Non-null only inside backward(): the per-call working buffers.
    std::vector<std::vector<double>>* active_ = nullptr;
};

}  // namespace dirlatent
