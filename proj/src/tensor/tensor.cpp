#include "oasis/tensor/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "oasis/kern/kernels.hpp"

namespace oasis {

int64_t numel_of(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

static std::shared_ptr<TensorImpl> make_impl(std::vector<int> shape) {
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::make_shared<std::vector<float>>((size_t)numel_of(impl->shape), 0.0f);
    return impl;
}

Tensor Tensor::zeros(std::vector<int> shape) { return Tensor(make_impl(std::move(shape))); }

Tensor Tensor::full(std::vector<int> shape, float value) {
    Tensor t = zeros(std::move(shape));
    kern::active().vfill(t.data(), value, (size_t)t.numel());
    return t;
}

Tensor Tensor::from_vector(std::vector<int> shape, std::vector<float> values) {
    if (numel_of(shape) != (int64_t)values.size())
        throw std::runtime_error("from_vector: shape/value count mismatch");
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::make_shared<std::vector<float>>(std::move(values));
    return Tensor(impl);
}

Tensor Tensor::scalar(float value) { return from_vector({1}, {value}); }

int64_t Tensor::numel() const { return numel_of(impl_->shape); }

float Tensor::item() const {
    if (numel() != 1) throw std::runtime_error("item() on non-scalar tensor");
    return (*impl_->data)[0];
}

Tensor& Tensor::set_requires_grad(bool v) {
    impl_->requires_grad = v;
    return *this;
}

Tensor Tensor::grad_tensor() const {
    if (!impl_->grad) return Tensor();
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = impl_->shape;
    impl->data = impl_->grad;
    return Tensor(impl);
}

float* Tensor::grad_data() {
    if (!impl_->grad)
        impl_->grad = std::make_shared<std::vector<float>>((size_t)numel(), 0.0f);
    return impl_->grad->data();
}

void Tensor::zero_grad() {
    if (impl_->grad) std::fill(impl_->grad->begin(), impl_->grad->end(), 0.0f);
}

Tensor Tensor::detach() const {
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = impl_->shape;
    impl->data = impl_->data;
    return Tensor(impl);
}

Tensor Tensor::clone() const {
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = impl_->shape;
    impl->data = std::make_shared<std::vector<float>>(*impl_->data);
    return Tensor(impl);
}

void accumulate_grad(const Tensor& t, const float* src, int64_t n) {
    Tensor mut = t;
    float* g = mut.grad_data();
    kern::active().vaxpy(g, 1.0f, src, (size_t)n);
}

void Tensor::backward() {
    if (numel() != 1) throw std::runtime_error("backward() requires a scalar loss");
    grad_data()[0] = 1.0f;

    // Post-order over the graph, then replay reversed so every node sees its
    // full output grad before running.
    std::vector<TensorImpl*> order;
    std::unordered_set<TensorImpl*> visited;
    struct Frame {
        TensorImpl* impl;
        size_t next_input;
    };
    std::vector<Frame> stack;
    if (impl_->grad_fn) stack.push_back({impl_.get(), 0});
    visited.insert(impl_.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        GradNode* node = f.impl->grad_fn.get();
        if (!node || f.next_input >= node->inputs.size()) {
            if (node) order.push_back(f.impl);
            stack.pop_back();
            continue;
        }
        TensorImpl* in = node->inputs[f.next_input++].impl().get();
        if (in && in->grad_fn && !visited.count(in)) {
            visited.insert(in);
            stack.push_back({in, 0});
        }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorImpl* impl = *it;
        if (!impl->grad) continue;  // no grad flowed here
        impl->grad_fn->backward(*impl);
    }
}

namespace {
thread_local bool g_grad_enabled = true;
}

bool GradMode::enabled() { return g_grad_enabled; }
void GradMode::set(bool v) { g_grad_enabled = v; }

// splitmix64
uint64_t Rng::next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double Rng::uniform() { return (double)(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int Rng::uniform_int(int lo, int hi) {
    // modulo bias negligible for our ranges (< 2^32)
    const uint64_t span = (uint64_t)(hi - lo + 1);
    return lo + (int)(next_u64() % span);
}

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 1e-300);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
}

Tensor randn(std::vector<int> shape, Rng& rng, float stddev) {
    Tensor t = Tensor::zeros(std::move(shape));
    float* p = t.data();
    const int64_t n = t.numel();
    for (int64_t i = 0; i < n; ++i) p[i] = stddev * (float)rng.normal();
    return t;
}

Tensor rand_uniform(std::vector<int> shape, Rng& rng, float lo, float hi) {
    Tensor t = Tensor::zeros(std::move(shape));
    float* p = t.data();
    const int64_t n = t.numel();
    for (int64_t i = 0; i < n; ++i) p[i] = (float)rng.uniform(lo, hi);
    return t;
}

}  // namespace oasis
