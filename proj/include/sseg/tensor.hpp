#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace sseg {

// Running account of tensor storage (values + grads). Activation peaks are
// measured as deltas against a baseline taken after parameters exist.
struct MemoryStats {
    static std::atomic<std::int64_t>& live() {
        static std::atomic<std::int64_t> bytes{0};
        return bytes;
    }
    static std::atomic<std::int64_t>& peak() {
        static std::atomic<std::int64_t> bytes{0};
        return bytes;
    }
    static void add(std::int64_t bytes) {
        const std::int64_t now = live().fetch_add(bytes) + bytes;
        std::int64_t prev = peak().load();
        while (now > prev && !peak().compare_exchange_weak(prev, now)) {
        }
    }
    static void sub(std::int64_t bytes) { live().fetch_sub(bytes); }
    static std::int64_t live_bytes() { return live().load(); }
    static std::int64_t peak_bytes() { return peak().load(); }
    static void reset_peak() { peak().store(live().load()); }
};

// When disabled, ops produce plain value tensors with no graph links, so
// inference frees intermediates as soon as they go out of scope.
struct GradMode {
    static bool& flag() {
        static thread_local bool enabled = true;
        return enabled;
    }
    static bool enabled() { return flag(); }
};

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(GradMode::flag()) { GradMode::flag() = false; }
    ~NoGradGuard() { GradMode::flag() = prev; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

using Shape = std::vector<int>;

inline std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ")";
    return os.str();
}

// Dense n-d array (order <= 4, batch x channel x height x width) with an
// optional gradient slot and the links needed for reverse-mode autodiff.
// Nodes that require grad record their parents plus a backprop closure;
// everything else is a plain value holder, so inference builds no graph.
template <typename T>
struct Tensor : std::enable_shared_from_this<Tensor<T>> {
    Shape shape;
    std::vector<T> values;
    bool requires_grad = false;
    std::vector<T> grad;  // empty until first accumulation

    std::vector<std::shared_ptr<Tensor>> parents;
    std::function<void()> backprop;  // reads this->grad, accumulates into parents

    Tensor(Shape s, std::vector<T> v, bool req)
        : shape(std::move(s)), values(std::move(v)), requires_grad(req) {
        if (shape.size() > 4) {
            throw std::invalid_argument("tensor order > 4: " + shape_str(shape));
        }
        for (int d : shape) {
            if (d <= 0) throw std::invalid_argument("non-positive dim in shape " + shape_str(shape));
        }
        if (static_cast<std::int64_t>(values.size()) != shape_numel(shape)) {
            throw std::invalid_argument("value count " + std::to_string(values.size()) +
                                        " does not match shape " + shape_str(shape));
        }
        MemoryStats::add(static_cast<std::int64_t>(values.size() * sizeof(T)));
    }

    ~Tensor() {
        MemoryStats::sub(static_cast<std::int64_t>((values.size() + grad.size()) * sizeof(T)));
    }

    Tensor(const Tensor&) = delete;
    Tensor& operator=(const Tensor&) = delete;

    std::int64_t numel() const { return static_cast<std::int64_t>(values.size()); }

    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    T item() const {
        if (values.size() != 1) throw std::runtime_error("item() on non-scalar tensor");
        return values[0];
    }

    void ensure_grad() {
        if (grad.empty()) {
            grad.assign(values.size(), T(0));
            MemoryStats::add(static_cast<std::int64_t>(grad.size() * sizeof(T)));
        }
    }

    void zero_grad() {
        std::fill(grad.begin(), grad.end(), T(0));
    }

    void accumulate_grad(const T* g, std::int64_t n) {
        if (n != numel()) throw std::runtime_error("gradient size mismatch");
        ensure_grad();
        for (std::int64_t i = 0; i < n; ++i) grad[static_cast<std::size_t>(i)] += g[i];
    }
};

template <typename T>
using TensorPtr = std::shared_ptr<Tensor<T>>;

template <typename T>
TensorPtr<T> make_tensor(Shape shape, std::vector<T> values, bool requires_grad = false) {
    return std::make_shared<Tensor<T>>(std::move(shape), std::move(values), requires_grad);
}

template <typename T>
TensorPtr<T> zeros(const Shape& shape, bool requires_grad = false) {
    return make_tensor<T>(shape, std::vector<T>(static_cast<std::size_t>(shape_numel(shape)), T(0)),
                          requires_grad);
}

template <typename T>
TensorPtr<T> full(const Shape& shape, T value, bool requires_grad = false) {
    return make_tensor<T>(shape, std::vector<T>(static_cast<std::size_t>(shape_numel(shape)), value),
                          requires_grad);
}

// Copy without graph links; grad never flows through the result.
template <typename T>
TensorPtr<T> detach(const TensorPtr<T>& x) {
    return make_tensor<T>(x->shape, x->values, false);
}

// Reverse-mode sweep from a scalar loss. Seeds d(loss)/d(loss) = 1,
// walks the recorded graph in reverse topological order and leaves
// accumulated gradients on every tensor with requires_grad set.
template <typename T>
void backward(const TensorPtr<T>& loss) {
    if (!loss->requires_grad) {
        throw std::runtime_error("backward() on a tensor that does not require grad");
    }
    if (loss->numel() != 1) {
        throw std::runtime_error("backward() expects a scalar loss, got " + shape_str(loss->shape));
    }

    std::vector<Tensor<T>*> order;
    std::unordered_set<Tensor<T>*> visited;
    std::function<void(Tensor<T>*)> visit = [&](Tensor<T>* node) {
        if (!visited.insert(node).second) return;
        for (const auto& p : node->parents) visit(p.get());
        order.push_back(node);
    };
    visit(loss.get());

    loss->ensure_grad();
    loss->grad[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backprop && !(*it)->grad.empty()) (*it)->backprop();
    }
}

// Per-pixel integer class labels, layout batch x height x width.
struct ClassMap {
    int b = 0, h = 0, w = 0;
    std::vector<std::int32_t> labels;

    ClassMap() = default;
    ClassMap(int b_, int h_, int w_, std::int32_t fill = 0)
        : b(b_), h(h_), w(w_), labels(static_cast<std::size_t>(b_) * h_ * w_, fill) {}

    std::int32_t& at(int bi, int y, int x) {
        return labels[(static_cast<std::size_t>(bi) * h + y) * w + x];
    }
    std::int32_t at(int bi, int y, int x) const {
        return labels[(static_cast<std::size_t>(bi) * h + y) * w + x];
    }
    std::int64_t numel() const { return static_cast<std::int64_t>(labels.size()); }
};

}  // namespace sseg
