#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace oasis {

class Tensor;
struct TensorImpl;

// One reverse-mode step: reads the output's grad, accumulates into inputs.
struct GradNode {
    const char* op = "";
    std::vector<Tensor> inputs;
    std::function<void(TensorImpl&)> backward;
};

struct TensorImpl {
    std::vector<int> shape;
    std::shared_ptr<std::vector<float>> data;
    std::shared_ptr<std::vector<float>> grad;  // lazily allocated
    bool requires_grad = false;
    std::shared_ptr<GradNode> grad_fn;
};

// Dense float32 array with reverse-mode autodiff. Contiguous row-major,
// value-semantic handle (copies share storage). Ops live in ops.hpp.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, float value);
    static Tensor from_vector(std::vector<int> shape, std::vector<float> values);
    static Tensor scalar(float value);

    bool defined() const { return impl_ != nullptr; }
    const std::vector<int>& shape() const { return impl_->shape; }
    int dim() const { return (int)impl_->shape.size(); }
    int size(int i) const { return impl_->shape[(size_t)i]; }
    int64_t numel() const;

    float* data() { return impl_->data->data(); }
    const float* data() const { return impl_->data->data(); }
    float item() const;  // numel()==1

    bool requires_grad() const { return impl_ && impl_->requires_grad; }
    Tensor& set_requires_grad(bool v);

    // Grad of a leaf (or retained) tensor; undefined Tensor if never set.
    Tensor grad_tensor() const;
    float* grad_data();  // allocates zeroed grad buffer on demand
    void zero_grad();

    // Same storage, no graph.
    Tensor detach() const;
    // Deep copy of values, no graph.
    Tensor clone() const;

    // Runs reverse-mode from this scalar.
    void backward();

    std::shared_ptr<TensorImpl> impl() const { return impl_; }
    TensorImpl& raw() { return *impl_; }
    const TensorImpl& raw() const { return *impl_; }

private:
    std::shared_ptr<TensorImpl> impl_;
};

// Thread-local switch; ops record no graph while disabled.
struct GradMode {
    static bool enabled();
    static void set(bool v);
};

struct NoGradGuard {
    NoGradGuard() : prev_(GradMode::enabled()) { GradMode::set(false); }
    ~NoGradGuard() { GradMode::set(prev_); }

private:
    bool prev_;
};

int64_t numel_of(const std::vector<int>& shape);

// Accumulates src into t's grad buffer (allocating it zeroed first).
void accumulate_grad(const Tensor& t, const float* src, int64_t n);

// Deterministic RNG used across the project (explicit Box-Muller normals so
// sequences do not depend on the standard library's distribution internals).
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

    uint64_t next_u64();
    double uniform();                    // [0,1)
    double uniform(double lo, double hi);
    int uniform_int(int lo, int hi);     // inclusive bounds
    double normal();
    uint64_t state() const { return state_; }

private:
    uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

Tensor randn(std::vector<int> shape, Rng& rng, float stddev = 1.0f);
Tensor rand_uniform(std::vector<int> shape, Rng& rng, float lo, float hi);

}  // namespace oasis
